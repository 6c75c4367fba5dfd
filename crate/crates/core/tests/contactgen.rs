mod oracles;

use corn::contactgen::{
    dataset_stats, generate_dataset, generate_record_traced, primitive_objects, read_dataset, write_dataset,
    ContactRecord, DataGenConfig,
};
use corn::geom::primitives::gripper;
use corn::geom::nearest_point_on_mesh;
use corn::patches::PatchConfig;
use proptest::prelude::*;

#[test]
fn labels_match_analytic_gripper() {
    let cfg = DataGenConfig::default();
    let records = generate_dataset(&primitive_objects(), &gripper(), &cfg, 300).unwrap();
    let (checked, bad, skipped) = oracles::analytic_label_check(&records);
    assert_eq!(bad, 0);
    assert_eq!(checked + skipped, 300 * 512);
    assert!(records.iter().any(|r| r.any_contact()));
}

#[test]
fn relabel_reproduces_stored_labels() {
    let cfg = DataGenConfig {
        seed: 11,
        ..DataGenConfig::default()
    };
    let records = generate_dataset(&primitive_objects(), &gripper(), &cfg, 100).unwrap();
    for r in &records {
        assert_eq!(r.relabel(&gripper()).unwrap(), r.labels);
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let cfg = DataGenConfig::default();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate_dataset(&primitive_objects(), &gripper(), &cfg, 40).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn approach_step_lands_near_the_surface() {
    // at σ = 0 the gripper is moved exactly by the sampled displacement, so
    // it ends up touching the object up to surface sampling resolution
    let cfg = DataGenConfig {
        sigma: 0.0,
        ..DataGenConfig::default()
    };
    let objs = primitive_objects();
    for i in 0..20u64 {
        let obj = &objs[i as usize % objs.len()];
        let (rec, trace) = generate_record_traced(obj, &gripper(), 0, &cfg, 500 + i).unwrap();
        let posed_obj = obj.transformed(&trace.object_pose);
        let g = gripper().transformed(&rec.pose().unwrap());
        // nearest gap between the surfaces, over gripper vertices and object samples
        let gap = posed_obj
            .vertices()
            .iter()
            .map(|v| nearest_point_on_mesh(v, &g).unwrap().1)
            .chain(g.vertices().iter().map(|v| nearest_point_on_mesh(v, &posed_obj).unwrap().1))
            .fold(f64::INFINITY, f64::min);
        assert!(gap < 0.02, "record {i}: gap {gap}");
        if let Some(s) = trace.scale {
            assert_eq!(s, 1.0);
        }
    }
}

#[test]
fn stats_fractions_are_consistent() {
    let cfg = DataGenConfig::default();
    let records = generate_dataset(&primitive_objects(), &gripper(), &cfg, 200).unwrap();
    let s = dataset_stats(&records, &PatchConfig::default()).unwrap();
    let any = records.iter().filter(|r| r.any_contact()).count() as f64 / 200.0;
    assert_eq!(s.fraction_records_any_contact, any);
    let pts = records.iter().flat_map(|r| &r.labels).filter(|&&l| l).count() as f64 / (200.0 * 512.0);
    assert!((s.fraction_points_positive - pts).abs() < 1e-15);
    // a record with no positive point has no positive patch and vice versa
    assert!(s.fraction_patches_positive >= s.fraction_points_positive);
    assert!(s.majority_patch_accuracy() >= 0.5);
}

/// The approach step lands the gripper (s−1)·‖δ‖ past the touching
/// position; with s ~ N(1, σ/‖δ‖) that overshoot has standard deviation σ.
#[test]
fn approach_noise_is_sigma_in_meters() {
    let cfg = DataGenConfig {
        seed: 77,
        sigma: 0.01,
        ..DataGenConfig::default()
    };
    let objs = primitive_objects();
    let g = gripper();
    let overshoot: Vec<f64> = (0..10_000u64)
        .filter_map(|i| {
            let obj = &objs[i as usize % objs.len()];
            let (_, t) = generate_record_traced(obj, &g, 0, &cfg, corn::contactgen::record_seed(cfg.seed, i)).unwrap();
            t.scale.map(|s| (s - 1.0) * t.displacement.norm())
        })
        .collect();
    assert!(overshoot.len() > 9_000);
    let n = overshoot.len() as f64;
    let mean = overshoot.iter().sum::<f64>() / n;
    let std = (overshoot.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((std - cfg.sigma).abs() < 0.2 * cfg.sigma, "std {std}");
    assert!(mean.abs() < 5.0 * cfg.sigma / n.sqrt(), "mean {mean}");
}

fn arb_record() -> impl Strategy<Value = ContactRecord> {
    (any::<u32>(), any::<u64>(), prop::collection::vec((any::<[f32; 3]>(), any::<bool>()), 0..64), -1.0f32..1.0)
        .prop_map(|(object_id, seed, pts, t)| ContactRecord {
            object_id,
            seed,
            gripper_pose: [t, -t, 0.5, 0.0, 0.0, 0.0, 1.0],
            points: pts.iter().map(|p| p.0).collect(),
            labels: pts.iter().map(|p| p.1).collect(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dataset_file_round_trips(records in prop::collection::vec(arb_record(), 0..8)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.corn");
        write_dataset(&records, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in back.iter().zip(&records) {
            prop_assert_eq!(a.object_id, b.object_id);
            prop_assert_eq!(a.seed, b.seed);
            prop_assert_eq!(a.labels.clone(), b.labels.clone());
            prop_assert_eq!(a.gripper_pose, b.gripper_pose);
            // bitwise, so NaN payloads survive too
            let bits = |r: &ContactRecord| r.points.iter().flat_map(|p| p.map(f32::to_bits)).collect::<Vec<_>>();
            prop_assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn truncated_files_are_rejected(records in prop::collection::vec(arb_record(), 1..4), cut in 1usize..40) {
        let mut buf = Vec::new();
        corn::contactgen::write_records(&records, &mut buf).unwrap();
        let cut = cut.min(buf.len() - 1);
        prop_assert!(corn::contactgen::read_records(&buf[..buf.len() - cut]).is_err());
    }
}
