//! Scores a scripted push: the hand approaches the box, pushes it onto the
//! goal, and the per-step reward terms are printed as CSV. The shaped terms
//! telescope, so their sum depends only on the end states.
//!
//! cargo run --release --example reward_trace [-- traj.json]

use corn::geom::{Pose, Rotation, Vec3};
use corn::reward::{trace_to_csv, RewardParams, Trajectory, TrajectoryStep};

fn main() -> corn::Result<()> {
    let half = Vec3::new(0.05, 0.05, 0.05);
    let goal = Pose::new(Vec3::new(0.3, 0.0, 0.05), Rotation::identity());
    let mut steps = Vec::new();
    for k in 0..=30 {
        let t = k as f64 / 30.0;
        // hand closes the 10 cm gap in the first third, then pushes
        let obj_x = if t < 1.0 / 3.0 { 0.0 } else { 0.3 * (t - 1.0 / 3.0) * 1.5 };
        let hand_x = if t < 1.0 / 3.0 { -0.15 + 0.3 * t } else { obj_x - 0.05 };
        steps.push(TrajectoryStep {
            pose: Pose::new(Vec3::new(obj_x, 0.0, 0.05), Rotation::identity()),
            com: None,
            gripper_tip: Vec3::new(hand_x, 0.0, 0.05),
            torque: [0.5; 7],
            qdot: [if k == 0 { 0.0 } else { 0.1 }; 7],
        });
    }
    let traj = Trajectory {
        goal,
        half_extents: half,
        params: RewardParams::default(),
        steps,
    };
    let terms = traj.reward_trace();
    print!("{}", trace_to_csv(&terms));

    let shaped: f64 = terms.iter().map(|t| t.r_reach + t.r_contact).sum();
    eprintln!(
        "shaped sum {shaped:.4}, successes {}, final d_og {:.4} m",
        terms.iter().filter(|t| t.success).count(),
        terms.last().map_or(0.0, |t| t.d_og)
    );
    // optionally save it as input for `corn reward-trace --traj`
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, serde_json::to_string_pretty(&traj).map_err(corn::Error::from)?)?;
        eprintln!("trajectory written to {path}");
    }
    Ok(())
}
