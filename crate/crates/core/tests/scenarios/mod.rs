//! Synthetic registration and tracking scenes shared by the tracking tests
//! and the acceptance suite.
#![allow(dead_code)]

use corn::geom::primitives::cuboid;
use corn::geom::{sample_surface_points, PointCloud, Pose, Rotation, Vec3};
use corn::percept::{icp, track_step, IcpConfig, TrackerConfig, TrackerState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn box_model(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_surface_points(&cuboid(Vec3::new(0.08, 0.05, 0.04)), n, &mut rng).unwrap()
}

pub fn add_noise(cloud: &PointCloud, sigma: f64, rng: &mut impl Rng) -> PointCloud {
    let n = Normal::new(0.0, sigma).unwrap();
    PointCloud::new(
        cloud
            .points
            .iter()
            .map(|p| p + Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng)))
            .collect(),
    )
}

/// Drops the `fraction` of points furthest along a random direction.
pub fn occlude(cloud: &PointCloud, fraction: f64, rng: &mut impl Rng) -> PointCloud {
    let d = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5).normalize();
    let mut proj: Vec<f64> = cloud.points.iter().map(|p| p.dot(&d)).collect();
    proj.sort_by(f64::total_cmp);
    let cut = proj[((1.0 - fraction) * proj.len() as f64) as usize];
    cloud.filter(|_, p| p.dot(&d) < cut)
}

/// 1 cm along a random direction, 5° about a random axis.
pub fn offset_pose(rng: &mut impl Rng) -> Pose {
    let dir = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5).normalize();
    let axis = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5).normalize();
    Pose::new(dir * 0.01, Rotation::from_axis_angle(&axis, 5f64.to_radians()))
}

/// Worst (translation, rotation) error recovering the offset over `seeds`
/// scenes. The observation is registered onto the normal-carrying model,
/// so the recovered pose is the inverse of the offset.
pub fn icp_recovery(seeds: u64, occlusion: f64, noise: f64) -> (f64, f64) {
    let model = box_model(2048, 0);
    let (mut wt, mut wr) = (0.0f64, 0.0f64);
    for s in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + s);
        let truth = offset_pose(&mut rng);
        let mut obs = model.transformed(&truth);
        if occlusion > 0.0 {
            obs = occlude(&obs, occlusion, &mut rng);
        }
        if noise > 0.0 {
            obs = add_noise(&obs, noise, &mut rng);
        }
        let r = icp(&obs, &model, &Pose::identity(), &IcpConfig::default()).unwrap();
        let (dt, dr) = r.pose.inverse().error_to(&truth);
        wt = wt.max(dt);
        wr = wr.max(dr);
    }
    (wt, wr)
}

pub struct TrackOutcome {
    pub max_drift: f64,
    pub final_drift: f64,
    pub all_reregistered: bool,
    pub lost_frames: usize,
}

/// A box sliding 5 mm per frame with a slow yaw, 1 mm sensor noise, 10%
/// occlusion from a fresh direction every frame.
pub fn slide_and_track(frames: usize, seed: u64) -> TrackOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = box_model(3000, seed);
    let obs = |pose: &Pose, rng: &mut ChaCha8Rng| {
        let c = occlude(&model.transformed(pose), 0.1, rng);
        add_noise(&c, 1e-3, rng)
    };
    let start = Pose::from_translation(Vec3::new(0.0, 0.0, 0.04));
    let first = obs(&start, &mut rng);
    let mut state = TrackerState::new(&first, start, TrackerConfig::default()).unwrap();
    let mut out = TrackOutcome {
        max_drift: 0.0,
        final_drift: 0.0,
        all_reregistered: true,
        lost_frames: 0,
    };
    for f in 1..=frames {
        let truth = Pose::new(Vec3::new(0.005 * f as f64, 0.0, 0.04), Rotation::from_yaw(0.01 * f as f64));
        let step = track_step(&mut state, &obs(&truth, &mut rng)).unwrap();
        let (dt, _) = step.pose.error_to(&truth);
        out.max_drift = out.max_drift.max(dt);
        out.final_drift = dt;
        out.all_reregistered &= step.reregistered;
        out.lost_frames += step.lost as usize;
    }
    out
}
