//! Contact-label dataset generation: sample object and gripper poses, pull the
//! gripper to (noisy) contact along the nearest displacement, then label object
//! surface points by containment in the moved gripper.

mod dataset;

pub use dataset::{read_dataset, read_records, write_dataset, write_records, DATASET_MAGIC, DATASET_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::containment::points_in_mesh;
use crate::geom::nearest::nearest_pair_from_samples;
use crate::geom::{random_rotation, sample_surface_points, Aabb, Pose, TriMesh, Vec3};
use crate::patches::{make_patches, PatchConfig, PatchSet};

/// Below this displacement norm the bodies already touch and the noisy
/// approach step is skipped.
pub const MIN_DISPLACEMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataGenConfig {
    pub workspace: Aabb,
    /// Standard deviation of the contact offset, meters.
    pub sigma: f64,
    pub n_surface_points: usize,
    /// Surface samples used by the nearest-displacement search.
    pub displacement_samples: usize,
    pub seed: u64,
}

impl Default for DataGenConfig {
    fn default() -> Self {
        DataGenConfig {
            workspace: Aabb {
                min: Vec3::new(-0.3, -0.3, -0.3),
                max: Vec3::new(0.3, 0.3, 0.3),
            },
            sigma: 0.01,
            n_surface_points: 512,
            displacement_samples: 1024,
            seed: 0,
        }
    }
}

impl DataGenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma {} must be >= 0", self.sigma)));
        }
        if self.n_surface_points == 0 || self.n_surface_points > u16::MAX as usize {
            return Err(Error::InvalidParameter("n_surface_points out of range".into()));
        }
        if self.displacement_samples == 0 {
            return Err(Error::InvalidParameter("displacement_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// One labeled sample. Points and pose are kept at the stored 32-bit
/// precision so labels can be re-derived from the record alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactRecord {
    pub object_id: u32,
    pub seed: u64,
    /// `[tx, ty, tz, qx, qy, qz, qw]` of the moved gripper, world frame.
    pub gripper_pose: [f32; 7],
    pub points: Vec<[f32; 3]>,
    pub labels: Vec<bool>,
}

impl ContactRecord {
    pub fn pose(&self) -> Result<Pose> {
        Pose::from_array(&self.gripper_pose.map(f64::from))
    }

    pub fn points_f64(&self) -> Vec<Vec3> {
        self.points
            .iter()
            .map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64))
            .collect()
    }

    pub fn cloud(&self) -> crate::geom::PointCloud {
        crate::geom::PointCloud::new(self.points_f64())
    }

    pub fn any_contact(&self) -> bool {
        self.labels.iter().any(|&l| l)
    }

    /// Re-derives labels from the stored pose and points.
    pub fn relabel(&self, gripper: &TriMesh) -> Result<Vec<bool>> {
        let g = gripper.transformed(&self.pose()?);
        points_in_mesh(&self.points_f64(), &g)
    }
}

/// Intermediate quantities of one generation run, for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordTrace {
    pub object_pose: Pose,
    pub sampled_gripper_pose: Pose,
    /// Nearest displacement from the object to the posed gripper.
    pub displacement: Vec3,
    /// Approach scale; `None` when the bodies already touched.
    pub scale: Option<f64>,
}

/// Independent uniform translations in `workspace` and uniform rotations
/// for the object and the gripper.
pub fn sample_poses<R: Rng + ?Sized>(workspace: &Aabb, rng: &mut R) -> (Pose, Pose) {
    let object = Pose::new(workspace.sample(rng), random_rotation(rng));
    let gripper = Pose::new(workspace.sample(rng), random_rotation(rng));
    (object, gripper)
}

/// SplitMix64 finalizer over the master seed and record index.
pub fn record_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn quantize_pose(pose: &Pose) -> Result<([f32; 7], Pose)> {
    let q = pose.to_array().map(|v| v as f32);
    let back = Pose::from_array(&q.map(f64::from))?;
    Ok((q, back))
}

fn check_inputs(obj: &TriMesh, grip: &TriMesh) -> Result<()> {
    if obj.is_empty() {
        return Err(Error::DegenerateGeometry("object mesh has no faces"));
    }
    obj.require_watertight()?;
    grip.require_watertight()
}

/// Labels `n` object-surface samples against the gripper placed at
/// `gripper_pose`, quantizing both to storage precision first.
fn label_record<R: Rng + ?Sized>(
    posed_object: &TriMesh,
    grip: &TriMesh,
    gripper_pose: &Pose,
    object_id: u32,
    seed: u64,
    n: usize,
    rng: &mut R,
) -> Result<ContactRecord> {
    let (stored_pose, pose) = quantize_pose(gripper_pose)?;
    let moved = grip.transformed(&pose);
    let cloud = sample_surface_points(posed_object, n, rng)?;
    let points: Vec<[f32; 3]> = cloud
        .points
        .iter()
        .map(|p| [p.x as f32, p.y as f32, p.z as f32])
        .collect();
    let pts64: Vec<Vec3> = points
        .iter()
        .map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64))
        .collect();
    let labels = points_in_mesh(&pts64, &moved)?;
    Ok(ContactRecord {
        object_id,
        seed,
        gripper_pose: stored_pose,
        points,
        labels,
    })
}

/// Generates one record from its own seed and returns the intermediate
/// quantities alongside it.
pub fn generate_record_traced(
    obj: &TriMesh,
    grip: &TriMesh,
    object_id: u32,
    cfg: &DataGenConfig,
    seed: u64,
) -> Result<(ContactRecord, RecordTrace)> {
    cfg.validate()?;
    check_inputs(obj, grip)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (object_pose, sampled) = sample_poses(&cfg.workspace, &mut rng);
    let posed_object = obj.transformed(&object_pose);
    let posed_gripper = grip.transformed(&sampled);
    let samples = sample_surface_points(&posed_object, cfg.displacement_samples, &mut rng)?;
    let delta = nearest_pair_from_samples(&samples.points, &posed_gripper)?.displacement();
    let norm = delta.norm();
    let (final_pose, scale) = if norm < MIN_DISPLACEMENT {
        (sampled, None)
    } else {
        let s = Normal::new(1.0, cfg.sigma / norm)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(&mut rng);
        let moved = Pose::new(sampled.translation - delta * s, sampled.rotation);
        (moved, Some(s))
    };
    let record = label_record(
        &posed_object,
        grip,
        &final_pose,
        object_id,
        seed,
        cfg.n_surface_points,
        &mut rng,
    )?;
    let trace = RecordTrace {
        object_pose,
        sampled_gripper_pose: sampled,
        displacement: delta,
        scale,
    };
    Ok((record, trace))
}

pub fn generate_record(
    obj: &TriMesh,
    grip: &TriMesh,
    object_id: u32,
    cfg: &DataGenConfig,
    seed: u64,
) -> Result<ContactRecord> {
    generate_record_traced(obj, grip, object_id, cfg, seed).map(|(r, _)| r)
}

/// Labels a record for a gripper placed explicitly rather than by the
/// approach step.
pub fn generate_record_at(
    obj: &TriMesh,
    object_pose: &Pose,
    grip: &TriMesh,
    gripper_pose: &Pose,
    object_id: u32,
    n_points: usize,
    seed: u64,
) -> Result<ContactRecord> {
    check_inputs(obj, grip)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let posed = obj.transformed(object_pose);
    label_record(&posed, grip, gripper_pose, object_id, seed, n_points, &mut rng)
}

/// Generates `count` records, cycling through `objects` by record index.
/// Records are seeded independently, so the output does not depend on the
/// worker count.
pub fn generate_dataset(
    objects: &[TriMesh],
    grip: &TriMesh,
    cfg: &DataGenConfig,
    count: usize,
) -> Result<Vec<ContactRecord>> {
    if objects.is_empty() {
        return Err(Error::DegenerateGeometry("no objects"));
    }
    cfg.validate()?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let id = i % objects.len();
            generate_record(
                &objects[id],
                grip,
                id as u32,
                cfg,
                record_seed(cfg.seed, i as u64),
            )
        })
        .collect()
}

/// Patch label = any member point labeled positive.
pub fn patch_labels(record: &ContactRecord, ps: &PatchSet) -> Result<Vec<bool>> {
    if let Some(&bad) = ps.member_indices.iter().find(|&&i| i >= record.labels.len()) {
        return Err(Error::SizeMismatch {
            expected: record.labels.len(),
            got: bad + 1,
        });
    }
    Ok((0..ps.n_patches())
        .map(|i| ps.members(i).iter().any(|&m| record.labels[m]))
        .collect())
}

/// Patch decomposition of a record's cloud and the matching patch labels.
pub fn record_patches(record: &ContactRecord, cfg: &PatchConfig) -> Result<(PatchSet, Vec<bool>)> {
    let ps = make_patches(&record.cloud(), cfg)?;
    let labels = patch_labels(record, &ps)?;
    Ok((ps, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_records: usize,
    pub fraction_records_any_contact: f64,
    pub fraction_points_positive: f64,
    pub fraction_patches_positive: f64,
}

impl DatasetStats {
    /// Accuracy of always predicting the more frequent patch label.
    pub fn majority_patch_accuracy(&self) -> f64 {
        self.fraction_patches_positive.max(1.0 - self.fraction_patches_positive)
    }
}

pub fn dataset_stats(records: &[ContactRecord], cfg: &PatchConfig) -> Result<DatasetStats> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut any = 0usize;
    let (mut pos_pts, mut n_pts) = (0usize, 0usize);
    let (mut pos_patches, mut n_patches) = (0usize, 0usize);
    for r in records {
        any += r.any_contact() as usize;
        pos_pts += r.labels.iter().filter(|&&l| l).count();
        n_pts += r.labels.len();
        let labels = if r.any_contact() {
            record_patches(r, cfg)?.1
        } else {
            vec![false; cfg.n_patches]
        };
        pos_patches += labels.iter().filter(|&&l| l).count();
        n_patches += labels.len();
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(DatasetStats {
        n_records: records.len(),
        fraction_records_any_contact: frac(any, records.len()),
        fraction_points_positive: frac(pos_pts, n_pts),
        fraction_patches_positive: frac(pos_patches, n_patches),
    })
}

/// The five closed primitives used for desk-scale datasets. Largest
/// diameters are 0.11–0.14 m, the small end of the 0.1–0.3 m object range.
pub fn primitive_objects() -> Vec<TriMesh> {
    use crate::geom::primitives::*;
    vec![
        cuboid(Vec3::new(0.04, 0.04, 0.04)),
        cuboid(Vec3::new(0.06, 0.03, 0.02)),
        cylinder(0.03, 0.11, 24),
        icosphere(0.055, 2),
        l_prism(0.04, 0.05),
    ]
}
