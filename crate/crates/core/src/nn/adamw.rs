use serde::{Deserialize, Serialize};

use super::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay, applied to rank ≥ 2 tensors only.
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adaptive-moment optimizer with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub cfg: AdamWConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig) -> Self {
        AdamW {
            cfg,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update over tensors given in a fixed order across calls.
    pub fn update(&mut self, params: &mut [&mut Tensor]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (k, p) in params.iter_mut().enumerate() {
            let decay = if p.rank() >= 2 { c.weight_decay } else { 0.0 };
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.data.len() {
                let g = p.grad[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p.data[i] -= c.lr * (mhat / (vhat.sqrt() + c.eps) + decay * p.data[i]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let mut x = Tensor::from_vec(&[2], vec![3.0, -2.0]).unwrap();
        let mut opt = AdamW::new(AdamWConfig {
            lr: 0.05,
            ..AdamWConfig::default()
        });
        for _ in 0..2000 {
            x.grad = x.data.iter().map(|v| 2.0 * v).collect();
            opt.update(&mut [&mut x]);
        }
        assert!(x.data.iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        let mut x = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        x.grad = vec![123.0];
        let mut opt = AdamW::new(AdamWConfig::default());
        opt.update(&mut [&mut x]);
        assert!((x.data[0] - (1.0 - 1e-3)).abs() < 1e-9);
    }
}
