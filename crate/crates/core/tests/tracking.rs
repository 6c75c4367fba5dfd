mod oracles;
mod scenarios;

use corn::geom::{random_rotation, Aabb, PointCloud, Pose, Rotation, Vec3};
use corn::percept::{
    canonical_labels, crop_workspace, dbscan, icp, radius_outlier_removal, remove_robot, remove_table, track_step,
    ConvexHull, IcpConfig, IcpMode, Plane, TrackerConfig, TrackerState,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn icp_recovers_clean_offset() {
    let (dt, dr) = scenarios::icp_recovery(20, 0.0, 0.0);
    assert!(dt < 1e-3 && dr < 1e-3, "{dt} m / {dr} rad");
}

#[test]
fn icp_recovers_occluded_noisy_offset() {
    let (dt, dr) = scenarios::icp_recovery(20, 0.1, 1e-3);
    assert!(dt < 5e-3 && dr < 1e-2, "{dt} m / {dr} rad");
}

#[test]
fn point_to_point_recovers_clean_offset() {
    let model = scenarios::box_model(2048, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let truth = scenarios::offset_pose(&mut rng);
    let cfg = IcpConfig {
        mode: IcpMode::PointToPoint,
        max_iters: 200,
        ..IcpConfig::default()
    };
    let r = icp(&model.transformed(&truth), &model, &Pose::identity(), &cfg).unwrap();
    let (dt, dr) = r.pose.inverse().error_to(&truth);
    assert!(dt < 1e-3 && dr < 1e-2, "{dt} m / {dr} rad");
}

#[test]
fn icp_fitness_and_residual_are_consistent() {
    let model = scenarios::box_model(1000, 1);
    let r = icp(&model, &model, &Pose::identity(), &IcpConfig::default()).unwrap();
    assert_eq!(r.fitness, 1.0);
    assert!(r.residual < 1e-12);
    // half the points moved far away can never match
    let mut pts = model.points.clone();
    for p in pts.iter_mut().skip(500) {
        *p += Vec3::new(1.0, 0.0, 0.0);
    }
    let r = icp(&PointCloud::new(pts), &model, &Pose::identity(), &IcpConfig::default()).unwrap();
    assert!((r.fitness - 0.5).abs() < 1e-12);
}

#[test]
fn twenty_frame_tracking_stays_within_5mm() {
    for seed in 0..3 {
        let o = scenarios::slide_and_track(20, seed);
        assert!(o.max_drift < 5e-3, "seed {seed}: drift {}", o.max_drift);
        assert!(o.all_reregistered, "seed {seed}");
        assert_eq!(o.lost_frames, 0);
    }
}

#[test]
fn empty_frame_holds_the_pose() {
    let model = scenarios::box_model(1000, 2);
    let start = Pose::new(Vec3::new(0.1, 0.0, 0.04), Rotation::from_yaw(0.3));
    let mut state = TrackerState::new(&model.transformed(&start), start, TrackerConfig::default()).unwrap();
    let s = track_step(&mut state, &PointCloud::new(Vec::new())).unwrap();
    assert!(s.lost);
    assert_eq!(s.pose, start);
    // and recovers on the next real frame
    let s = track_step(&mut state, &model.transformed(&start)).unwrap();
    assert!(!s.lost && s.reregistered);
    assert!(s.pose.error_to(&start).0 < 1e-6);
}

#[test]
fn icp_residual_never_increases() {
    let model = scenarios::box_model(2048, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let truth = scenarios::offset_pose(&mut rng);
        let obs = scenarios::add_noise(&model.transformed(&truth), 1e-3, &mut rng);
        let residuals: Vec<f64> = (1..=15)
            .map(|k| {
                let cfg = IcpConfig {
                    max_iters: k,
                    ..IcpConfig::default()
                };
                icp(&obs, &model, &Pose::identity(), &cfg).unwrap().residual
            })
            .collect();
        assert!(residuals.windows(2).all(|w| w[1] <= w[0]), "{residuals:?}");
    }
}

fn arb_rigid() -> impl Strategy<Value = Pose> {
    (any::<u64>(), -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_map(|(s, x, y, z)| Pose::new(Vec3::new(x, y, z), random_rotation(&mut ChaCha8Rng::seed_from_u64(s))))
}

fn scene(seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = oracles::blob_cloud(300, &mut rng);
    // a table sheet at z = 0 and some stragglers
    pts.extend((0..100).map(|_| Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), 0.0)));
    pts.extend(oracles::uniform_cloud(20, 0.3, &mut rng));
    PointCloud::new(pts)
}

fn is_subsequence(sub: &[Vec3], of: &[Vec3]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|p| it.any(|q| q == p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Each stage only drops points, and moving the scene together with
    /// the stage's geometry moves the output the same way.
    #[test]
    fn segmentation_stages_are_rigid_filters(seed in any::<u64>(), t in arb_rigid()) {
        let c = scene(seed);
        let moved = c.transformed(&t);
        let same = |a: &PointCloud, b: &PointCloud| {
            a.len() == b.len() && a.points.iter().zip(&b.points).all(|(p, q)| (t.transform_point(p) - q).norm() < 1e-12)
        };

        let plane = Plane::new(Vec3::zeros(), Vec3::z()).unwrap();
        let moved_plane = Plane::new(t.translation, t.rotation.rotate(&Vec3::z())).unwrap();
        let a = remove_table(&c, &plane, 0.01);
        prop_assert!(is_subsequence(&a.points, &c.points));
        prop_assert!(same(&a, &remove_table(&moved, &moved_plane, 0.01)));

        let hull = ConvexHull::from_aabb(&Aabb::new(Vec3::new(-0.1, -0.1, 0.05), Vec3::new(0.0, 0.1, 0.2)).unwrap());
        let moved_hull = ConvexHull {
            halfspaces: hull
                .halfspaces
                .iter()
                .map(|(n, d)| {
                    let n2 = t.rotation.rotate(n);
                    (n2, d + n2.dot(&t.translation))
                })
                .collect(),
        };
        let b = remove_robot(&c, std::slice::from_ref(&hull));
        prop_assert!(is_subsequence(&b.points, &c.points));
        prop_assert!(same(&b, &remove_robot(&moved, &[moved_hull])));

        // boxes only stay boxes under translation
        let bx = Aabb::new(Vec3::new(-0.1, -0.1, -0.05), Vec3::new(0.1, 0.05, 0.1)).unwrap();
        let shift = Pose::from_translation(t.translation);
        let cropped = crop_workspace(&c, &bx);
        prop_assert!(is_subsequence(&cropped.points, &c.points));
        let moved_box = Aabb::new(bx.min + t.translation, bx.max + t.translation).unwrap();
        let cropped_moved = crop_workspace(&c.transformed(&shift), &moved_box);
        prop_assert_eq!(cropped.len(), cropped_moved.len());

        let r = radius_outlier_removal(&c, 0.02, 8).unwrap();
        prop_assert!(is_subsequence(&r.points, &c.points));
        prop_assert!(same(&r, &radius_outlier_removal(&moved, 0.02, 8).unwrap()));

        let labels = dbscan(&c.points, 0.012, 4).unwrap();
        prop_assert_eq!(labels, dbscan(&moved.points, 0.012, 4).unwrap());
    }

    #[test]
    fn dbscan_ignores_point_order(seed in any::<u64>(), n in 2usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = oracles::blob_cloud(n, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<Vec3> = perm.iter().map(|&i| pts[i]).collect();
        let labels = dbscan(&pts, 0.015, 4).unwrap();
        let back = dbscan(&shuffled, 0.015, 4).unwrap();
        let mut restored = vec![0; n];
        for (j, &i) in perm.iter().enumerate() {
            restored[i] = back[j];
        }
        prop_assert_eq!(canonical_labels(&restored), labels);
    }
}
