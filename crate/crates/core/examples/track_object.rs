//! Synthesizes a noisy point-cloud sequence of a box sliding across the
//! table and tracks it with frame-to-frame ICP plus re-registration.
//!
//! cargo run --release --example track_object

use corn::geom::primitives::cuboid;
use corn::geom::{sample_surface_points, PointCloud, Pose, Rotation, Vec3};
use corn::percept::{icp, track_step, IcpConfig, TrackerConfig, TrackerState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn noisy(cloud: &PointCloud, sigma: f64, rng: &mut ChaCha8Rng) -> PointCloud {
    let n = Normal::new(0.0, sigma).unwrap();
    PointCloud::new(
        cloud
            .points
            .iter()
            .map(|p| p + Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng)))
            .collect(),
    )
}

fn main() -> corn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = sample_surface_points(&cuboid(Vec3::new(0.08, 0.05, 0.04)), 2048, &mut rng)?;

    // one-shot registration against a known transform
    let truth = Pose::new(
        Vec3::new(0.01, 0.0, 0.0),
        Rotation::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0).normalize(), 5f64.to_radians()),
    );
    let r = icp(&model, &model.transformed(&truth), &Pose::identity(), &IcpConfig::default())?;
    let (dt, dr) = r.pose.error_to(&truth);
    println!("known transform: err {dt:.2e} m / {dr:.2e} rad, fitness {:.3}, {} iters", r.fitness, r.iterations);

    // tracking: 5 mm per frame with a slow yaw
    let start = Pose::from_translation(Vec3::new(0.0, 0.0, 0.04));
    let mut state = TrackerState::new(&noisy(&model.transformed(&start), 1e-3, &mut rng), start, TrackerConfig::default())?;
    for f in 1..=20 {
        let yaw = 0.01 * f as f64 + rng.random::<f64>() * 1e-4;
        let truth = Pose::new(Vec3::new(0.005 * f as f64, 0.0, 0.04), Rotation::from_yaw(yaw));
        let frame = noisy(&model.transformed(&truth), 1e-3, &mut rng);
        let step = track_step(&mut state, &frame)?;
        let (dt, dr) = step.pose.error_to(&truth);
        println!(
            "frame {f:2}: err {:.2} mm / {:.3}°, fitness prev {:.2} init {:.2}{}",
            dt * 1e3,
            dr.to_degrees(),
            step.fitness_previous,
            step.fitness_initial,
            if step.reregistered { " (re-registered)" } else { "" }
        );
    }
    Ok(())
}
