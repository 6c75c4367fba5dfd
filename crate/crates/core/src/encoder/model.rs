use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EncoderConfig, EncoderInput, Encoded};
use crate::error::{Error, Result};
use crate::nn::{
    bce_grad, bce_loss, self_attention_backward, self_attention_forward, LayerNorm,
    LayerNormCache, Linear, Mlp, MlpCache, Tensor,
};

/// Pre-norm transformer block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub ln1: LayerNorm,
    pub qkv: Linear,
    pub proj: Linear,
    pub ln2: LayerNorm,
    pub ffn: Mlp,
}

#[derive(Debug, Clone, Default)]
struct BlockCache {
    ln1: LayerNormCache,
    normed1: Vec<f64>,
    qkv: Vec<f64>,
    probs: Vec<f64>,
    attn: Vec<f64>,
    ln2: LayerNormCache,
    ffn: MlpCache,
}

impl Block {
    fn new<R: Rng + ?Sized>(cfg: &EncoderConfig, rng: &mut R) -> Self {
        let d = cfg.d_model;
        Block {
            ln1: LayerNorm::new(d),
            qkv: Linear::new(d, 3 * d, rng),
            proj: Linear::new(d, d, rng),
            ln2: LayerNorm::new(d),
            ffn: Mlp::new(d, cfg.ffn_dim, d, rng),
        }
    }

    fn forward(&self, x: &mut [f64], batch: usize, cfg: &EncoderConfig) -> BlockCache {
        let (t, d) = (cfg.tokens(), cfg.d_model);
        let rows = batch * t;
        let (normed1, ln1) = self.ln1.forward(x, rows);
        let qkv = self.qkv.forward(&normed1, rows);
        let (attn, probs) = self_attention_forward(&qkv, batch, t, d, cfg.n_heads);
        let o = self.proj.forward(&attn, rows);
        x.iter_mut().zip(&o).for_each(|(a, b)| *a += b);
        let (normed2, ln2) = self.ln2.forward(x, rows);
        let (f, ffn) = self.ffn.forward(&normed2, rows);
        x.iter_mut().zip(&f).for_each(|(a, b)| *a += b);
        BlockCache {
            ln1,
            normed1,
            qkv,
            probs,
            attn,
            ln2,
            ffn,
        }
    }

    /// `dx` holds dL/d(block output) on entry and dL/d(block input) on exit.
    fn backward(&mut self, c: &BlockCache, dx: &mut [f64], batch: usize, cfg: &EncoderConfig) {
        let (t, d) = (cfg.tokens(), cfg.d_model);
        let rows = batch * t;
        let dn2 = self.ffn.backward(&c.ffn, dx, rows);
        let dres = self.ln2.backward(&c.ln2, &dn2, rows);
        dx.iter_mut().zip(&dres).for_each(|(a, b)| *a += b);
        let dattn = self.proj.backward(&c.attn, dx, rows);
        let dqkv = self_attention_backward(&c.qkv, &c.probs, &dattn, batch, t, d, cfg.n_heads);
        let dn1 = self.qkv.backward(&c.normed1, &dqkv, rows);
        let dres = self.ln1.backward(&c.ln1, &dn1, rows);
        dx.iter_mut().zip(&dres).for_each(|(a, b)| *a += b);
    }

    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let f = self.ffn.tensors();
        vec![
            ("ln1.gamma", &self.ln1.gamma),
            ("ln1.beta", &self.ln1.beta),
            ("qkv.w", &self.qkv.w),
            ("qkv.b", &self.qkv.b),
            ("proj.w", &self.proj.w),
            ("proj.b", &self.proj.b),
            ("ln2.gamma", &self.ln2.gamma),
            ("ln2.beta", &self.ln2.beta),
            ("ffn.fc1.w", f[0]),
            ("ffn.fc1.b", f[1]),
            ("ffn.fc2.w", f[2]),
            ("ffn.fc2.b", f[3]),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let [a, b, c, e] = self.ffn.tensors_mut();
        vec![
            &mut self.ln1.gamma,
            &mut self.ln1.beta,
            &mut self.qkv.w,
            &mut self.qkv.b,
            &mut self.proj.w,
            &mut self.proj.b,
            &mut self.ln2.gamma,
            &mut self.ln2.beta,
            a,
            b,
            c,
            e,
        ]
    }
}

/// All learnable tensors of the encoder and contact decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub cfg: EncoderConfig,
    pub tokenizer: Mlp,
    pub pos_embed: Mlp,
    pub hand_embed: Mlp,
    pub blocks: Vec<Block>,
    pub ln_f: LayerNorm,
    pub decoder: Mlp,
}

/// Intermediates of a batched forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    batch: usize,
    tokenizer: MlpCache,
    pos_embed: MlpCache,
    hand_embed: MlpCache,
    blocks: Vec<BlockCache>,
    ln_f: LayerNormCache,
    decoder: MlpCache,
    /// Final normalized tokens, `batch*tokens × d_model`.
    pub tokens: Vec<f64>,
}

impl EncoderParams {
    pub fn new<R: Rng + ?Sized>(cfg: EncoderConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        Ok(EncoderParams {
            tokenizer: Mlp::new(cfg.patch_features(), d, d, rng),
            pos_embed: Mlp::new(3, d, d, rng),
            hand_embed: Mlp::new(cfg.hand_dim, d, d, rng),
            blocks: (0..cfg.n_layers).map(|_| Block::new(&cfg, rng)).collect(),
            ln_f: LayerNorm::new(d),
            decoder: Mlp::new(d, cfg.decoder_hidden, 1, rng),
            cfg,
        })
    }

    /// Tensors with stable, dotted names, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        named_mlp("tokenizer", &self.tokenizer, &mut out);
        named_mlp("pos_embed", &self.pos_embed, &mut out);
        named_mlp("hand_embed", &self.hand_embed, &mut out);
        for (i, b) in self.blocks.iter().enumerate() {
            for (n, t) in b.tensors() {
                out.push((format!("blocks.{i}.{n}"), t));
            }
        }
        out.push(("ln_f.gamma".into(), &self.ln_f.gamma));
        out.push(("ln_f.beta".into(), &self.ln_f.beta));
        named_mlp("decoder", &self.decoder, &mut out);
        out
    }

    /// Mutable tensors in the same order as [`Self::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        out.extend(self.tokenizer.tensors_mut());
        out.extend(self.pos_embed.tensors_mut());
        out.extend(self.hand_embed.tensors_mut());
        for b in &mut self.blocks {
            out.extend(b.tensors_mut());
        }
        out.push(&mut self.ln_f.gamma);
        out.push(&mut self.ln_f.beta);
        out.extend(self.decoder.tensors_mut());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn zero_grad(&mut self) {
        for t in self.tensors_mut() {
            t.zero_grad();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// Rebuilds parameters from named tensors; every expected name must be
    /// present with a matching shape.
    pub fn from_named(cfg: EncoderConfig, named: &BTreeMap<String, Tensor>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = EncoderParams::new(cfg, &mut rng)?;
        let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
        for (name, slot) in names.iter().zip(params.tensors_mut()) {
            let src = named
                .get(name)
                .ok_or_else(|| Error::Config(format!("checkpoint is missing tensor {name}")))?;
            if src.shape != slot.shape {
                return Err(Error::ShapeMismatch {
                    expected: slot.shape.clone(),
                    got: src.shape.clone(),
                });
            }
            slot.data.copy_from_slice(&src.data);
        }
        Ok(params)
    }

    /// Batched forward pass to per-patch logits (`batch × n_patches`).
    pub fn forward(&self, inputs: &[&EncoderInput]) -> (Vec<f64>, ForwardCache) {
        let cfg = &self.cfg;
        let (p, t, d) = (cfg.patch.n_patches, cfg.tokens(), cfg.d_model);
        let batch = inputs.len();
        let xp: Vec<f64> = inputs.iter().flat_map(|i| i.patches.iter().copied()).collect();
        let xc: Vec<f64> = inputs.iter().flat_map(|i| i.centers.iter().copied()).collect();
        let xh: Vec<f64> = inputs.iter().flat_map(|i| i.hand.iter().copied()).collect();
        let (tok, tokenizer) = self.tokenizer.forward(&xp, batch * p);
        let (pe, pos_embed) = self.pos_embed.forward(&xc, batch * p);
        let (hand, hand_embed) = self.hand_embed.forward(&xh, batch);

        let mut x = vec![0.0; batch * t * d];
        for b in 0..batch {
            for i in 0..p {
                let dst = &mut x[(b * t + i) * d..(b * t + i + 1) * d];
                let src = (b * p + i) * d;
                for j in 0..d {
                    dst[j] = tok[src + j] + pe[src + j];
                }
            }
            x[(b * t + p) * d..(b * t + p + 1) * d].copy_from_slice(&hand[b * d..(b + 1) * d]);
        }
        let blocks = self
            .blocks
            .iter()
            .map(|blk| blk.forward(&mut x, batch, cfg))
            .collect();
        let (tokens, ln_f) = self.ln_f.forward(&x, batch * t);
        let patch_rows = gather_patch_rows(&tokens, batch, p, t, d);
        let (logits, decoder) = self.decoder.forward(&patch_rows, batch * p);
        (
            logits,
            ForwardCache {
                batch,
                tokenizer,
                pos_embed,
                hand_embed,
                blocks,
                ln_f,
                decoder,
                tokens,
            },
        )
    }

    /// Accumulates parameter gradients for upstream logit gradients.
    pub fn backward(&mut self, cache: &ForwardCache, dlogits: &[f64]) {
        let cfg = self.cfg;
        let (p, t, d) = (cfg.patch.n_patches, cfg.tokens(), cfg.d_model);
        let batch = cache.batch;
        let drows = self.decoder.backward(&cache.decoder, dlogits, batch * p);
        let mut dtokens = vec![0.0; batch * t * d];
        for b in 0..batch {
            for i in 0..p {
                dtokens[(b * t + i) * d..(b * t + i + 1) * d]
                    .copy_from_slice(&drows[(b * p + i) * d..(b * p + i + 1) * d]);
            }
        }
        let mut dx = self.ln_f.backward(&cache.ln_f, &dtokens, batch * t);
        for (blk, c) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            blk.backward(c, &mut dx, batch, &cfg);
        }
        let mut dpatch = vec![0.0; batch * p * d];
        let mut dhand = vec![0.0; batch * d];
        for b in 0..batch {
            for i in 0..p {
                dpatch[(b * p + i) * d..(b * p + i + 1) * d]
                    .copy_from_slice(&dx[(b * t + i) * d..(b * t + i + 1) * d]);
            }
            dhand[b * d..(b + 1) * d].copy_from_slice(&dx[(b * t + p) * d..(b * t + p + 1) * d]);
        }
        self.tokenizer.backward(&cache.tokenizer, &dpatch, batch * p);
        self.pos_embed.backward(&cache.pos_embed, &dpatch, batch * p);
        self.hand_embed.backward(&cache.hand_embed, &dhand, batch);
    }

    /// Mean BCE over every patch in the batch.
    pub fn loss(&self, inputs: &[&EncoderInput], labels: &[&[bool]]) -> f64 {
        let (logits, _) = self.forward(inputs);
        let flat: Vec<bool> = labels.iter().flat_map(|l| l.iter().copied()).collect();
        bce_loss(&logits, &flat)
    }

    /// Zeroes gradients, runs forward and backward, and returns the batch
    /// loss with the logits. Gradients are of the mean patch BCE.
    pub fn loss_and_grad(
        &mut self,
        inputs: &[&EncoderInput],
        labels: &[&[bool]],
    ) -> Result<(f64, Vec<f64>)> {
        self.zero_grad();
        let (logits, cache) = self.forward(inputs);
        let flat: Vec<bool> = labels.iter().flat_map(|l| l.iter().copied()).collect();
        if flat.len() != logits.len() {
            return Err(Error::SizeMismatch {
                expected: logits.len(),
                got: flat.len(),
            });
        }
        let loss = bce_loss(&logits, &flat);
        let dlogits = bce_grad(&logits, &flat, 1.0 / flat.len() as f64);
        self.backward(&cache, &dlogits);
        for (name, t) in self.named_tensors() {
            if t.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(name));
            }
        }
        Ok((loss, logits))
    }

    /// Patch and hand embeddings for a single sample.
    pub fn encode_input(&self, input: &EncoderInput) -> Encoded {
        let (p, t, d) = (self.cfg.patch.n_patches, self.cfg.tokens(), self.cfg.d_model);
        let (_, cache) = self.forward(&[input]);
        Encoded {
            patch_embeddings: cache.tokens[..p * d].to_vec(),
            hand_embedding: cache.tokens[p * d..t * d].to_vec(),
        }
    }
}

fn named_mlp<'a>(prefix: &str, m: &'a Mlp, out: &mut Vec<(String, &'a Tensor)>) {
    for (suffix, t) in ["fc1.w", "fc1.b", "fc2.w", "fc2.b"].iter().zip(m.tensors()) {
        out.push((format!("{prefix}.{suffix}"), t));
    }
}

fn gather_patch_rows(tokens: &[f64], batch: usize, p: usize, t: usize, d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * p * d);
    for b in 0..batch {
        out.extend_from_slice(&tokens[b * t * d..(b * t + p) * d]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::sigmoid;
    use crate::patches::PatchConfig;
    use rand::Rng;

    fn tiny_cfg() -> EncoderConfig {
        EncoderConfig {
            d_model: 8,
            n_layers: 2,
            n_heads: 2,
            ffn_dim: 12,
            patch: PatchConfig {
                n_points: 16,
                n_patches: 4,
                patch_size: 4,
            },
            hand_dim: 9,
            decoder_hidden: 6,
        }
    }

    fn random_input<R: Rng>(cfg: &EncoderConfig, rng: &mut R) -> EncoderInput {
        let (p, k) = (cfg.patch.n_patches, cfg.patch.patch_size);
        let mut u = |s: f64| (rng.random::<f64>() * 2.0 - 1.0) * s;
        EncoderInput {
            patches: (0..p * k * 3).map(|_| u(0.05)).collect(),
            centers: (0..p * 3).map(|_| u(0.1)).collect(),
            hand: std::array::from_fn(|_| u(1.0)),
        }
    }

    fn setup(seed: u64) -> (EncoderParams, Vec<EncoderInput>, Vec<Vec<bool>>) {
        let cfg = tiny_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = EncoderParams::new(cfg, &mut rng).unwrap();
        let inputs: Vec<_> = (0..3).map(|_| random_input(&cfg, &mut rng)).collect();
        let labels = (0..3)
            .map(|_| (0..cfg.patch.n_patches).map(|_| rng.random::<bool>()).collect())
            .collect();
        (params, inputs, labels)
    }

    fn loss_of(params: &EncoderParams, inputs: &[EncoderInput], labels: &[Vec<bool>]) -> f64 {
        let refs: Vec<&EncoderInput> = inputs.iter().collect();
        let lab: Vec<&[bool]> = labels.iter().map(|l| l.as_slice()).collect();
        params.loss(&refs, &lab)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (mut params, inputs, labels) = setup(11);
        let refs: Vec<&EncoderInput> = inputs.iter().collect();
        let lab: Vec<&[bool]> = labels.iter().map(|l| l.as_slice()).collect();
        params.loss_and_grad(&refs, &lab).unwrap();
        let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
        let grads: Vec<Vec<f64>> = params
            .named_tensors()
            .into_iter()
            .map(|(_, t)| t.grad.clone())
            .collect();
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for (k, name) in names.iter().enumerate() {
            let n = grads[k].len();
            // whole-tensor directional derivative
            let dir: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let analytic: f64 = dir.iter().zip(&grads[k]).map(|(a, b)| a * b).sum();
            let shift = |p: &mut EncoderParams, s: f64| {
                let t = &mut p.tensors_mut()[k].data;
                t.iter_mut().zip(&dir).for_each(|(v, d)| *v += s * d);
            };
            let mut plus = params.clone();
            shift(&mut plus, h);
            let mut minus = params.clone();
            shift(&mut minus, -h);
            let fd = (loss_of(&plus, &inputs, &labels) - loss_of(&minus, &inputs, &labels))
                / (2.0 * h);
            let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-8);
            assert!(rel < 1e-4, "{name}: fd {fd} vs analytic {analytic}");
            // a few individual elements
            for _ in 0..3 {
                let i = rng.random_range(0..n);
                let mut plus = params.clone();
                plus.tensors_mut()[k].data[i] += h;
                let mut minus = params.clone();
                minus.tensors_mut()[k].data[i] -= h;
                let fd = (loss_of(&plus, &inputs, &labels) - loss_of(&minus, &inputs, &labels))
                    / (2.0 * h);
                let g = grads[k][i];
                let err = (fd - g).abs();
                assert!(
                    err < 1e-4 * fd.abs().max(g.abs()) || err < 1e-9,
                    "{name}[{i}]: fd {fd} vs analytic {g}"
                );
            }
        }
    }

    #[test]
    fn loss_is_naive_bce() {
        let (params, inputs, labels) = setup(4);
        let refs: Vec<&EncoderInput> = inputs.iter().collect();
        let (logits, _) = params.forward(&refs);
        let flat: Vec<bool> = labels.iter().flatten().copied().collect();
        let naive: f64 = logits
            .iter()
            .zip(&flat)
            .map(|(&z, &y)| {
                let p: f64 = sigmoid(z);
                if y {
                    -p.ln()
                } else {
                    -(1.0 - p).ln()
                }
            })
            .sum::<f64>()
            / flat.len() as f64;
        assert!((loss_of(&params, &inputs, &labels) - naive).abs() < 1e-12);
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let (mut params, inputs, labels) = setup(5);
        let refs: Vec<&EncoderInput> = inputs.iter().collect();
        let lab: Vec<&[bool]> = labels.iter().map(|l| l.as_slice()).collect();
        params.loss_and_grad(&refs, &lab).unwrap();
        let g1: Vec<f64> = params
            .named_tensors()
            .iter()
            .flat_map(|(_, t)| t.grad.clone())
            .collect();
        let refs2: Vec<&EncoderInput> = refs.iter().chain(&refs).copied().collect();
        let lab2: Vec<&[bool]> = lab.iter().chain(&lab).copied().collect();
        params.loss_and_grad(&refs2, &lab2).unwrap();
        let g2: Vec<f64> = params
            .named_tensors()
            .iter()
            .flat_map(|(_, t)| t.grad.clone())
            .collect();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn patch_permutation_permutes_logits() {
        let (params, inputs, _) = setup(6);
        let cfg = params.cfg;
        let (p, k) = (cfg.patch.n_patches, cfg.patch.patch_size);
        let perm = [2usize, 0, 3, 1];
        let x = &inputs[0];
        let y = EncoderInput {
            patches: perm
                .iter()
                .flat_map(|&i| x.patches[i * k * 3..(i + 1) * k * 3].to_vec())
                .collect(),
            centers: perm.iter().flat_map(|&i| x.centers[i * 3..i * 3 + 3].to_vec()).collect(),
            hand: x.hand,
        };
        let (a, _) = params.forward(&[x]);
        let (b, _) = params.forward(&[&y]);
        for j in 0..p {
            assert!((b[j] - a[perm[j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_positional_embedding_ignores_center_shift() {
        let (mut params, inputs, _) = setup(7);
        params.pos_embed.fc2.w.data.iter_mut().for_each(|v| *v = 0.0);
        params.pos_embed.fc2.b.data.iter_mut().for_each(|v| *v = 0.0);
        let x = &inputs[0];
        let mut y = x.clone();
        y.centers.iter_mut().for_each(|c| *c += 0.37);
        assert_eq!(params.forward(&[x]).0, params.forward(&[&y]).0);
    }

    #[test]
    fn deterministic_init_and_forward() {
        let (a, inputs, _) = setup(8);
        let (b, _, _) = setup(8);
        assert_eq!(a, b);
        let refs: Vec<&EncoderInput> = inputs.iter().collect();
        assert_eq!(a.forward(&refs).0, b.forward(&refs).0);
    }

    #[test]
    fn batched_forward_matches_single() {
        let (params, inputs, _) = setup(9);
        let refs: Vec<&EncoderInput> = inputs.iter().collect();
        let (all, _) = params.forward(&refs);
        let p = params.cfg.patch.n_patches;
        for (i, x) in inputs.iter().enumerate() {
            let (one, _) = params.forward(&[x]);
            for j in 0..p {
                assert!((one[j] - all[i * p + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn from_named_round_trips() {
        let (params, _, _) = setup(10);
        let named: BTreeMap<String, Tensor> = params
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        assert_eq!(EncoderParams::from_named(params.cfg, &named).unwrap(), params);
        let mut missing = named.clone();
        missing.remove("ln_f.gamma");
        assert!(EncoderParams::from_named(params.cfg, &missing).is_err());
    }
}
