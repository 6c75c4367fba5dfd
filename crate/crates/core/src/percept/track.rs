use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{estimate_normals, icp, IcpConfig};
use crate::contactgen::record_seed;
use crate::error::{Error, Result};
use crate::geom::{PointCloud, Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub icp: IcpConfig,
    /// Re-registration against the first cloud overrides the pose when its
    /// fitness exceeds this.
    pub fitness_threshold: f64,
    pub n_track: usize,
    pub normal_k: usize,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            icp: IcpConfig::default(),
            fitness_threshold: 0.6,
            n_track: 2048,
            normal_k: 16,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fitness_threshold) {
            return Err(Error::InvalidParameter("fitness threshold must lie in [0, 1]".into()));
        }
        if self.n_track == 0 || self.normal_k < 3 {
            return Err(Error::InvalidParameter("n_track > 0 and normal_k ≥ 3 required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub cfg: TrackerConfig,
    pub pose: Pose,
    pub initial_pose: Pose,
    /// First (subsampled) cloud with normals.
    pub initial: PointCloud,
    pub previous: PointCloud,
    pub frame: u64,
}

/// Per-frame tracking outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackStep {
    pub frame: u64,
    pub pose: Pose,
    pub fitness_previous: f64,
    pub fitness_initial: f64,
    pub reregistered: bool,
    /// No correspondences this frame; the previous pose was kept.
    pub lost: bool,
}

fn viewpoint(pc: &PointCloud) -> Vec3 {
    // outward-ish orientation is irrelevant to point-to-plane residuals;
    // a fixed point far above keeps it deterministic
    pc.centroid().unwrap_or_default() + Vec3::new(0.0, 0.0, 10.0)
}

fn subsample(cloud: &PointCloud, n: usize, seed: u64) -> PointCloud {
    if cloud.len() <= n {
        return cloud.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, cloud.len(), n).into_vec();
    idx.sort_unstable();
    cloud.select(&idx)
}

impl TrackerState {
    pub fn new(initial_cloud: &PointCloud, initial_pose: Pose, cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let sub = subsample(initial_cloud, cfg.n_track, record_seed(cfg.seed, 0));
        let initial = estimate_normals(&sub, cfg.normal_k, &viewpoint(&sub))?;
        Ok(TrackerState {
            cfg,
            pose: initial_pose,
            initial_pose,
            previous: initial.clone(),
            initial,
            frame: 0,
        })
    }
}

/// Advances the tracker by one frame: frame-to-frame ICP gives a provisional
/// pose, then registration against the first cloud overrides it when fit.
pub fn track_step(state: &mut TrackerState, cloud: &PointCloud) -> Result<TrackStep> {
    state.frame += 1;
    let cfg = state.cfg;
    let lost = |state: &TrackerState| TrackStep {
        frame: state.frame,
        pose: state.pose,
        fitness_previous: 0.0,
        fitness_initial: 0.0,
        reregistered: false,
        lost: true,
    };
    if cloud.len() <= cfg.normal_k {
        return Ok(lost(state));
    }
    let cur = subsample(cloud, cfg.n_track, record_seed(cfg.seed, state.frame));
    // current → previous; its inverse moves the object forward
    let prev_fit = match icp(&cur, &state.previous, &Pose::identity(), &cfg.icp) {
        Ok(r) => r,
        Err(Error::NoCorrespondences(_)) => return Ok(lost(state)),
        Err(e) => return Err(e),
    };
    let mut pose = prev_fit.pose.inverse().compose(&state.pose);
    // current → initial, seeded by the provisional pose
    let init = state.initial_pose.compose(&pose.inverse());
    let (fitness_initial, reregistered) = match icp(&cur, &state.initial, &init, &cfg.icp) {
        Ok(r) if r.fitness > cfg.fitness_threshold => {
            pose = r.pose.inverse().compose(&state.initial_pose);
            (r.fitness, true)
        }
        Ok(r) => (r.fitness, false),
        Err(Error::NoCorrespondences(_)) => (0.0, false),
        Err(e) => return Err(e),
    };
    state.pose = pose;
    state.previous = estimate_normals(&cur, cfg.normal_k, &viewpoint(&cur))?;
    Ok(TrackStep {
        frame: state.frame,
        pose,
        fitness_previous: prev_fit.fitness,
        fitness_initial,
        reregistered,
        lost: false,
    })
}
