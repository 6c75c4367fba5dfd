//! Turns a hand-space residual into joint targets with damped least-squares
//! IK on a 7-joint arm, then evaluates the joint impedance torque.
//!
//! cargo run --release --example ik_control

use corn::control::{ik, torque, IkConfig, SerialChain};
use corn::geom::{Pose, Rotation, Vec3};

fn main() -> corn::Result<()> {
    let arm = SerialChain::franka_like();
    let q0 = [0.0, -0.3, 0.0, -2.2, 0.0, 2.0, 0.8];
    let start = arm.fk(&q0)?;
    println!("start hand position {:?}", start.translation.as_slice());

    let cfg = IkConfig::default();
    for residual in [
        Pose::from_translation(Vec3::new(0.01, 0.0, 0.0)),
        Pose::from_translation(Vec3::new(0.0, 0.02, -0.02)),
        Pose::new(Vec3::zeros(), Rotation::from_axis_angle(&Vec3::z(), 0.1)),
    ] {
        let sol = ik(&arm, &q0, &residual, &cfg)?;
        println!(
            "residual {:?}: {:?} after {} iterations, errors {:.2e} m / {:.2e} rad",
            residual.to_array().map(|v| (v * 1e3).round() / 1e3),
            sol.status,
            sol.iterations,
            sol.translation_error,
            sol.rotation_error
        );
        let qdot = [0.0; 7];
        let tau = torque(&[100.0; 7], &[1.0; 7], &sol.q, &q0, &qdot)?;
        let peak = tau.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        println!("  impedance torque peak {peak:.3} N·m");
    }
    Ok(())
}
