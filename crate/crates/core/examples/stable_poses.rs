//! Resting orientations of the primitive meshes, then a few sampled
//! initial/goal episode pairs on a table.
//!
//! cargo run --release --example stable_poses

use corn::contactgen::primitive_objects;
use corn::geom::{Aabb, Vec3};
use corn::poses::{sample_episode, stable_orientations, DEFAULT_MARGIN};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> corn::Result<()> {
    let names = ["cube", "box", "cylinder", "sphere", "l-prism"];
    let objects = primitive_objects();
    for (name, mesh) in names.iter().zip(&objects) {
        let poses = stable_orientations(mesh, DEFAULT_MARGIN)?;
        println!("{name:>9}: {} stable classes", poses.len());
        for p in poses.iter().take(6) {
            let q = p.rotation.to_xyzw();
            println!(
                "           q = [{:+.3} {:+.3} {:+.3} {:+.3}]  rest {:.4} m  margin {:.4} m",
                q[0], q[1], q[2], q[3], p.rest_height, p.margin
            );
        }
    }

    // episodes for the box: initial and goal at least 10 cm apart
    let stable = stable_orientations(&objects[1], DEFAULT_MARGIN)?;
    let table = Aabb::new(Vec3::new(-0.3, -0.3, 0.0), Vec3::new(0.3, 0.3, 0.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..3 {
        let ep = sample_episode(&stable, &table, 1, &mut rng)?;
        let d = (ep.goal.translation - ep.initial.translation).norm();
        println!(
            "episode: class {} -> {}, distance {:.3} m",
            ep.initial_class, ep.goal_class, d
        );
    }
    Ok(())
}
