//! Minimal dense layers with hand-written reverse passes. Activations are
//! row-major `rows × features` slices; weights are `in × out`.

mod adamw;
mod ops;

pub use adamw::{AdamW, AdamWConfig};
pub use ops::*;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `f64` tensor with an attached gradient buffer of the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        let mut t = Tensor::zeros(shape);
        t.data.fill(v);
        t
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::SizeMismatch {
                expected: n,
                got: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            data,
        })
    }

    pub fn randn<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        let mut t = Tensor::zeros(shape);
        let d = Normal::new(0.0, std).expect("finite std");
        for v in &mut t.data {
            *v = d.sample(rng);
        }
        t
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn zero_grad(&mut self) {
        if self.grad.len() != self.data.len() {
            self.grad = vec![0.0; self.data.len()];
        } else {
            self.grad.fill(0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Affine map `y = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    /// Weights drawn from `N(0, 1/fan_in)`, zero bias.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Linear {
            w: Tensor::randn(&[input, output], (1.0 / input as f64).sqrt(), rng),
            b: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape[0]
    }

    pub fn output_dim(&self) -> usize {
        self.w.shape[1]
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let (i, o) = (self.input_dim(), self.output_dim());
        debug_assert_eq!(x.len(), rows * i);
        let mut y = Vec::with_capacity(rows * o);
        for _ in 0..rows {
            y.extend_from_slice(&self.b.data);
        }
        gemm(rows, i, o, x, false, &self.w.data, false, &mut y, 1.0);
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &[f64], dy: &[f64], rows: usize) -> Vec<f64> {
        let (i, o) = (self.input_dim(), self.output_dim());
        // dW += xᵀ dy
        gemm(i, rows, o, x, true, dy, false, &mut self.w.grad, 1.0);
        for r in 0..rows {
            for (g, d) in self.b.grad.iter_mut().zip(&dy[r * o..(r + 1) * o]) {
                *g += d;
            }
        }
        let mut dx = vec![0.0; rows * i];
        gemm(rows, o, i, dy, false, &self.w.data, true, &mut dx, 0.0);
        dx
    }
}

/// Two linear layers with a GELU in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        Mlp {
            fc1: Linear::new(input, hidden, rng),
            fc2: Linear::new(hidden, output, rng),
        }
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> (Vec<f64>, MlpCache) {
        let pre = self.fc1.forward(x, rows);
        let act: Vec<f64> = pre.iter().map(|&v| gelu(v)).collect();
        let y = self.fc2.forward(&act, rows);
        (
            y,
            MlpCache {
                input: x.to_vec(),
                pre,
                act,
            },
        )
    }

    pub fn backward(&mut self, cache: &MlpCache, dy: &[f64], rows: usize) -> Vec<f64> {
        let dact = self.fc2.backward(&cache.act, dy, rows);
        let dpre: Vec<f64> = dact
            .iter()
            .zip(&cache.pre)
            .map(|(d, &p)| d * gelu_grad(p))
            .collect();
        self.fc1.backward(&cache.input, &dpre, rows)
    }

    pub fn tensors(&self) -> [&Tensor; 4] {
        [&self.fc1.w, &self.fc1.b, &self.fc2.w, &self.fc2.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 4] {
        [
            &mut self.fc1.w,
            &mut self.fc1.b,
            &mut self.fc2.w,
            &mut self.fc2.b,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
}

#[derive(Debug, Clone, Default)]
pub struct LayerNormCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub const LN_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: Tensor::filled(&[dim], 1.0),
            beta: Tensor::zeros(&[dim]),
        }
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> (Vec<f64>, LayerNormCache) {
        let d = self.gamma.numel();
        let mut y = vec![0.0; rows * d];
        let mut xhat = vec![0.0; rows * d];
        let mut rstd = vec![0.0; rows];
        for r in 0..rows {
            let row = &x[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (row[j] - mean) * rs;
                xhat[r * d + j] = h;
                y[r * d + j] = h * self.gamma.data[j] + self.beta.data[j];
            }
        }
        (y, LayerNormCache { xhat, rstd })
    }

    pub fn backward(&mut self, cache: &LayerNormCache, dy: &[f64], rows: usize) -> Vec<f64> {
        let d = self.gamma.numel();
        let mut dx = vec![0.0; rows * d];
        for r in 0..rows {
            let xh = &cache.xhat[r * d..(r + 1) * d];
            let g = &dy[r * d..(r + 1) * d];
            let mut mean_dxh = 0.0;
            let mut mean_dxh_xh = 0.0;
            for j in 0..d {
                self.gamma.grad[j] += g[j] * xh[j];
                self.beta.grad[j] += g[j];
                let dxh = g[j] * self.gamma.data[j];
                mean_dxh += dxh;
                mean_dxh_xh += dxh * xh[j];
            }
            mean_dxh /= d as f64;
            mean_dxh_xh /= d as f64;
            for j in 0..d {
                let dxh = g[j] * self.gamma.data[j];
                dx[r * d + j] = cache.rstd[r] * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
            }
        }
        dx
    }
}
