//! Forward-only actor/critic head: task inputs become query tokens that
//! cross-attend over the encoder's patch embeddings.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pose, Rot6D, Vec3};
use crate::nn::{gelu, softmax_in_place, Linear, Mlp, Tensor};

pub const ACTION_DIM: usize = 20;
pub const N_JOINTS: usize = 7;

/// Domain-randomization ranges used to scale physics inputs onto [0, 1].
pub const MASS_RANGE: (f64, f64) = (0.1, 0.5);
pub const FRICTION_RANGE: (f64, f64) = (0.7, 1.0);
pub const RESTITUTION_RANGE: (f64, f64) = (0.0, 1.0);

/// Hand subgoal residual plus joint-space impedance gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionCommand {
    pub delta_translation: [f64; 3],
    /// Axis-angle, radians.
    pub delta_rotation: [f64; 3],
    pub kp: [f64; N_JOINTS],
    pub rho: [f64; N_JOINTS],
}

impl Default for ActionCommand {
    fn default() -> Self {
        ActionCommand {
            delta_translation: [0.0; 3],
            delta_rotation: [0.0; 3],
            kp: [1.0; N_JOINTS],
            rho: [1.0; N_JOINTS],
        }
    }
}

impl ActionCommand {
    pub fn validate(&self) -> Result<()> {
        if self.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("action"));
        }
        if self.kp.iter().chain(&self.rho).any(|&g| g <= 0.0) {
            return Err(Error::NonPositiveGains);
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(ACTION_DIM);
        v.extend_from_slice(&self.delta_translation);
        v.extend_from_slice(&self.delta_rotation);
        v.extend_from_slice(&self.kp);
        v.extend_from_slice(&self.rho);
        v
    }

    /// Maps a raw actor output; gains go through a softplus.
    pub fn from_raw(raw: &[f64]) -> Result<Self> {
        if raw.len() != ACTION_DIM {
            return Err(Error::SizeMismatch {
                expected: ACTION_DIM,
                got: raw.len(),
            });
        }
        Ok(ActionCommand {
            delta_translation: std::array::from_fn(|i| raw[i]),
            delta_rotation: std::array::from_fn(|i| raw[3 + i]),
            kp: std::array::from_fn(|i| softplus(raw[6 + i])),
            rho: std::array::from_fn(|i| softplus(raw[13 + i])),
        })
    }

    /// The residual as a rigid transform.
    pub fn delta_pose(&self) -> Pose {
        let t = self.delta_translation;
        let r = self.delta_rotation;
        Pose::new(
            Vec3::new(t[0], t[1], t[2]),
            crate::geom::Rotation::from_scaled_axis(&Vec3::new(r[0], r[1], r[2])),
        )
    }
}

/// `ln(1 + e^x)`, kept strictly positive for every finite input.
pub fn softplus(x: f64) -> f64 {
    let y = if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    };
    y.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    pub mass: f64,
    pub friction: f64,
    pub restitution: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            mass: 0.3,
            friction: 0.85,
            restitution: 0.5,
        }
    }
}

impl PhysicsParams {
    /// Min-max scaled onto the randomization ranges (values outside the
    /// range extrapolate linearly).
    pub fn normalized(&self) -> [f64; 3] {
        let mm = |v: f64, (lo, hi): (f64, f64)| (v - lo) / (hi - lo);
        [
            mm(self.mass, MASS_RANGE),
            mm(self.friction, FRICTION_RANGE),
            mm(self.restitution, RESTITUTION_RANGE),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskInputs {
    pub joint_position: [f64; N_JOINTS],
    pub joint_velocity: [f64; N_JOINTS],
    pub previous_action: ActionCommand,
    pub relative_goal_pose: Pose,
    pub physics: PhysicsParams,
}

impl Default for TaskInputs {
    fn default() -> Self {
        TaskInputs {
            joint_position: [0.0; N_JOINTS],
            joint_velocity: [0.0; N_JOINTS],
            previous_action: ActionCommand::default(),
            relative_goal_pose: Pose::identity(),
            physics: PhysicsParams::default(),
        }
    }
}

/// Length of [`TaskInputs::features`].
pub const TASK_FEATURES: usize = N_JOINTS * 2 + ACTION_DIM + 9 + 3;

impl TaskInputs {
    pub fn features(&self) -> Result<Vec<f64>> {
        let mut f = Vec::with_capacity(TASK_FEATURES);
        f.extend_from_slice(&self.joint_position);
        f.extend_from_slice(&self.joint_velocity);
        f.extend(self.previous_action.to_vec());
        let g = &self.relative_goal_pose;
        f.extend_from_slice(g.translation.as_slice());
        f.extend_from_slice(&Rot6D::from_rotation(&g.rotation).0);
        f.extend_from_slice(&self.physics.normalized());
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("task inputs"));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Width of the encoder's patch embeddings.
    pub embed_dim: usize,
    pub n_patches: usize,
    pub n_queries: usize,
    pub n_heads: usize,
    pub task_hidden: usize,
    pub shared: Vec<usize>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            embed_dim: 128,
            n_patches: 16,
            n_queries: 4,
            n_heads: 16,
            task_hidden: 128,
            shared: vec![512, 256, 128],
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || !self.embed_dim.is_multiple_of(self.n_heads) {
            return Err(Error::InvalidParameter(format!(
                "embed_dim {} must be a multiple of n_heads {}",
                self.embed_dim, self.n_heads
            )));
        }
        if self.n_queries == 0 || self.n_patches == 0 || self.task_hidden == 0 {
            return Err(Error::InvalidParameter("policy widths must be positive".into()));
        }
        if self.shared.is_empty() || self.shared.contains(&0) {
            return Err(Error::InvalidParameter("shared MLP needs positive widths".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub cfg: PolicyConfig,
    /// Task features → task embedding.
    pub task_mlp: Mlp,
    /// Task embedding → `n_queries` query tokens.
    pub query_proj: Linear,
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub shared: Vec<Linear>,
    pub actor: Linear,
    pub critic: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    /// Raw actor output: Δt (3), Δr (3), kp (7), ρ (7) before the softplus.
    pub raw_action: Vec<f64>,
    pub action: ActionCommand,
    pub value: f64,
    /// `heads × queries × patches`, each row a softmax distribution.
    pub attention: Vec<f64>,
}

impl PolicyParams {
    pub fn new<R: Rng + ?Sized>(cfg: PolicyConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let (d, h) = (cfg.embed_dim, cfg.task_hidden);
        let mut shared = Vec::with_capacity(cfg.shared.len());
        let mut width = cfg.n_queries * d + h;
        for &w in &cfg.shared {
            shared.push(Linear::new(width, w, rng));
            width = w;
        }
        Ok(PolicyParams {
            task_mlp: Mlp::new(TASK_FEATURES, h, h, rng),
            query_proj: Linear::new(h, cfg.n_queries * d, rng),
            wq: Linear::new(d, d, rng),
            wk: Linear::new(d, d, rng),
            wv: Linear::new(d, d, rng),
            wo: Linear::new(d, d, rng),
            actor: Linear::new(width, ACTION_DIM, rng),
            critic: Linear::new(width, 1, rng),
            shared,
            cfg,
        })
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        lin("policy.task_mlp.fc1".into(), &self.task_mlp.fc1, &mut out);
        lin("policy.task_mlp.fc2".into(), &self.task_mlp.fc2, &mut out);
        lin("policy.query_proj".into(), &self.query_proj, &mut out);
        lin("policy.wq".into(), &self.wq, &mut out);
        lin("policy.wk".into(), &self.wk, &mut out);
        lin("policy.wv".into(), &self.wv, &mut out);
        lin("policy.wo".into(), &self.wo, &mut out);
        for (i, l) in self.shared.iter().enumerate() {
            lin(format!("policy.shared.{i}"), l, &mut out);
        }
        lin("policy.actor".into(), &self.actor, &mut out);
        lin("policy.critic".into(), &self.critic, &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        out.extend(self.task_mlp.tensors_mut());
        for l in [
            &mut self.query_proj,
            &mut self.wq,
            &mut self.wk,
            &mut self.wv,
            &mut self.wo,
        ] {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        for l in &mut self.shared {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        out.push(&mut self.actor.w);
        out.push(&mut self.actor.b);
        out.push(&mut self.critic.w);
        out.push(&mut self.critic.b);
        out
    }

    /// Loads `policy.*` tensors; returns `Ok(None)` when none are present.
    pub fn from_named(cfg: PolicyConfig, named: &BTreeMap<String, Tensor>) -> Result<Option<Self>> {
        if !named.keys().any(|k| k.starts_with("policy.")) {
            return Ok(None);
        }
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut p = PolicyParams::new(cfg, &mut rng)?;
        let names: Vec<String> = p.named_tensors().into_iter().map(|(n, _)| n).collect();
        for (name, slot) in names.iter().zip(p.tensors_mut()) {
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
        Ok(Some(p))
    }
}

fn lin<'a>(name: String, l: &'a Linear, out: &mut Vec<(String, &'a Tensor)>) {
    out.push((format!("{name}.w"), &l.w));
    out.push((format!("{name}.b"), &l.b));
}

/// Multi-head scaled-dot-product attention of `nq` queries over `nk` keys
/// (all `× d`). Returns outputs (`nq × d`) and probabilities
/// (`heads × nq × nk`).
pub fn cross_attention(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    nq: usize,
    nk: usize,
    d: usize,
    heads: usize,
) -> (Vec<f64>, Vec<f64>) {
    let hd = d / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut out = vec![0.0; nq * d];
    let mut probs = vec![0.0; heads * nq * nk];
    for h in 0..heads {
        for i in 0..nq {
            let qi = &q[i * d + h * hd..][..hd];
            let row = &mut probs[(h * nq + i) * nk..(h * nq + i + 1) * nk];
            for (j, r) in row.iter_mut().enumerate() {
                let kj = &k[j * d + h * hd..][..hd];
                *r = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
            softmax_in_place(row);
            let o = &mut out[i * d + h * hd..][..hd];
            for (j, &p) in row.iter().enumerate() {
                for (ov, vv) in o.iter_mut().zip(&v[j * d + h * hd..][..hd]) {
                    *ov += p * vv;
                }
            }
        }
    }
    (out, probs)
}

pub fn policy_forward(
    params: &PolicyParams,
    patch_embeddings: &[f64],
    task: &TaskInputs,
) -> Result<PolicyOutput> {
    let cfg = &params.cfg;
    let (p, d, nq) = (cfg.n_patches, cfg.embed_dim, cfg.n_queries);
    if patch_embeddings.len() != p * d {
        return Err(Error::ShapeMismatch {
            expected: vec![p, d],
            got: vec![patch_embeddings.len() / d, d],
        });
    }
    if patch_embeddings.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("patch embeddings"));
    }
    let feats = task.features()?;
    let (task_emb, _) = params.task_mlp.forward(&feats, 1);
    let queries = params.query_proj.forward(&task_emb, 1);
    let q = params.wq.forward(&queries, nq);
    let k = params.wk.forward(patch_embeddings, p);
    let v = params.wv.forward(patch_embeddings, p);
    let (attended, attention) = cross_attention(&q, &k, &v, nq, p, d, cfg.n_heads);
    let mut x = params.wo.forward(&attended, nq);
    x.extend_from_slice(&task_emb);
    for layer in &params.shared {
        x = layer.forward(&x, 1).into_iter().map(gelu).collect();
    }
    let raw_action = params.actor.forward(&x, 1);
    let value = params.critic.forward(&x, 1)[0];
    Ok(PolicyOutput {
        action: ActionCommand::from_raw(&raw_action)?,
        raw_action,
        value,
        attention,
    })
}

/// Per-patch attention summed over heads and queries, min-max scaled to
/// [0, 1]; a constant profile maps to 0.5 everywhere.
pub fn attention_map(attention: &[f64], n_patches: usize) -> Result<Vec<f64>> {
    if n_patches == 0 || !attention.len().is_multiple_of(n_patches) {
        return Err(Error::SizeMismatch {
            expected: n_patches,
            got: attention.len(),
        });
    }
    let mut sums = vec![0.0; n_patches];
    for row in attention.chunks_exact(n_patches) {
        for (s, a) in sums.iter_mut().zip(row) {
            *s += a;
        }
    }
    let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return Ok(vec![0.5; n_patches]);
    }
    Ok(sums.iter().map(|s| (s - lo) / (hi - lo)).collect())
}
