//! Patch-transformer point-cloud encoder with a per-patch contact decoder.
//!
//! Each of the 16 patches is flattened (32 sorted, center-relative points) and
//! tokenized by an MLP; an MLP of the patch center is added as a positional
//! embedding. The hand state (position and 6D orientation) becomes one extra
//! token. Two pre-norm transformer blocks mix all 17 tokens, and a shared MLP
//! maps each final patch token to a contact logit.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{
    checkpoint_tensors, config_from_tensors, read_checkpoint, read_tensors, write_checkpoint,
    write_tensors, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use model::{Block, EncoderParams, ForwardCache};
pub use train::{
    evaluate, prepare_dataset, train, train_with, ClassificationMetrics, EpochReport, TrainConfig,
    TrainReport,
};

use serde::{Deserialize, Serialize};

use crate::contactgen::{patch_labels, ContactRecord};
use crate::error::{Error, Result};
use crate::geom::{Pose, Rot6D, Vec3};
use crate::patches::{make_patches, PatchConfig, PatchSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    pub patch: PatchConfig,
    pub hand_dim: usize,
    pub decoder_hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_model: 128,
            n_layers: 2,
            n_heads: 4,
            ffn_dim: 256,
            patch: PatchConfig::default(),
            hand_dim: 9,
            decoder_hidden: 64,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        self.patch.validate()?;
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::InvalidParameter(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.hand_dim != 9 {
            return Err(Error::InvalidParameter("hand_dim must be 9".into()));
        }
        if self.ffn_dim == 0 || self.decoder_hidden == 0 {
            return Err(Error::InvalidParameter("hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub fn tokens(&self) -> usize {
        self.patch.n_patches + 1
    }

    pub fn patch_features(&self) -> usize {
        self.patch.patch_size * 3
    }
}

/// Gripper position and 6D orientation, in the encoder's input frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub position: Vec3,
    pub orientation: Rot6D,
}

impl HandState {
    pub fn from_pose(pose: &Pose) -> Self {
        HandState {
            position: pose.translation,
            orientation: Rot6D::from_rotation(&pose.rotation),
        }
    }

    pub fn to_features(&self) -> [f64; 9] {
        let o = self.orientation.0;
        [
            self.position.x,
            self.position.y,
            self.position.z,
            o[0],
            o[1],
            o[2],
            o[3],
            o[4],
            o[5],
        ]
    }
}

/// One encoder sample in flat form.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderInput {
    /// `n_patches × patch_size × 3`
    pub patches: Vec<f64>,
    /// `n_patches × 3`
    pub centers: Vec<f64>,
    pub hand: [f64; 9],
}

impl EncoderInput {
    pub fn new(ps: &PatchSet, hand: &HandState, cfg: &EncoderConfig) -> Result<Self> {
        let (p, k) = (cfg.patch.n_patches, cfg.patch.patch_size);
        if ps.n_patches() != p || ps.patch_size != k || ps.patches.len() != p * k {
            return Err(Error::ShapeMismatch {
                expected: vec![p, k, 3],
                got: vec![ps.n_patches(), ps.patch_size, 3],
            });
        }
        let patches: Vec<f64> = ps.patches.iter().flat_map(|v| [v.x, v.y, v.z]).collect();
        let centers: Vec<f64> = ps.centers.iter().flat_map(|v| [v.x, v.y, v.z]).collect();
        let hand = hand.to_features();
        if patches
            .iter()
            .chain(&centers)
            .chain(&hand)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFiniteInput("encoder input"));
        }
        Ok(EncoderInput {
            patches,
            centers,
            hand,
        })
    }

    /// Centers the record's cloud on its centroid, expresses the gripper pose
    /// in the same shifted frame, and returns the input with patch labels.
    pub fn from_record(record: &ContactRecord, cfg: &EncoderConfig) -> Result<(Self, Vec<bool>)> {
        let cloud = record.cloud();
        let centroid = cloud.centroid().ok_or(Error::EmptyDataset)?;
        let shifted = cloud.transformed(&Pose::from_translation(-centroid));
        let ps = make_patches(&shifted, &cfg.patch)?;
        let labels = patch_labels(record, &ps)?;
        let mut pose = record.pose()?;
        pose.translation -= centroid;
        Ok((EncoderInput::new(&ps, &HandState::from_pose(&pose), cfg)?, labels))
    }
}

/// Encoder outputs for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    /// `n_patches × d_model`
    pub patch_embeddings: Vec<f64>,
    pub hand_embedding: Vec<f64>,
}

/// Encodes one patch set and hand state.
pub fn encode(params: &EncoderParams, patches: &PatchSet, hand: &HandState) -> Result<Encoded> {
    let input = EncoderInput::new(patches, hand, &params.cfg)?;
    Ok(params.encode_input(&input))
}

/// Per-patch contact logits from patch embeddings (`n_patches × d_model`).
pub fn decode_contact(params: &EncoderParams, patch_embeddings: &[f64]) -> Result<Vec<f64>> {
    let d = params.cfg.d_model;
    let p = params.cfg.patch.n_patches;
    if patch_embeddings.len() != p * d {
        return Err(Error::ShapeMismatch {
            expected: vec![p, d],
            got: vec![patch_embeddings.len() / d.max(1), d],
        });
    }
    Ok(params.decoder.forward(patch_embeddings, p).0)
}
