//! Fixed-size patch decomposition of a point cloud: farthest-point centers,
//! k-nearest-neighbor members, center-subtracted and sorted by distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub n_points: usize,
    pub n_patches: usize,
    pub patch_size: usize,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            n_points: 512,
            n_patches: 16,
            patch_size: 32,
        }
    }
}

impl PatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patches == 0 || self.patch_size == 0 {
            return Err(Error::InvalidParameter("patch counts must be positive".into()));
        }
        if self.n_patches > self.n_points || self.patch_size > self.n_points {
            return Err(Error::InvalidParameter(format!(
                "patch config {self:?} exceeds the point count"
            )));
        }
        Ok(())
    }
}

/// Patches stored row-major: patch `i` occupies `[i*k, (i+1)*k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub patch_size: usize,
    pub centers: Vec<Vec3>,
    pub center_indices: Vec<usize>,
    pub patches: Vec<Vec3>,
    pub member_indices: Vec<usize>,
}

impl PatchSet {
    pub fn n_patches(&self) -> usize {
        self.centers.len()
    }

    pub fn patch(&self, i: usize) -> &[Vec3] {
        &self.patches[i * self.patch_size..(i + 1) * self.patch_size]
    }

    pub fn members(&self, i: usize) -> &[usize] {
        &self.member_indices[i * self.patch_size..(i + 1) * self.patch_size]
    }

    /// Reorders patches so that new patch `j` is old patch `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> PatchSet {
        let k = self.patch_size;
        PatchSet {
            patch_size: k,
            centers: perm.iter().map(|&p| self.centers[p]).collect(),
            center_indices: perm.iter().map(|&p| self.center_indices[p]).collect(),
            patches: perm.iter().flat_map(|&p| self.patch(p).to_vec()).collect(),
            member_indices: perm.iter().flat_map(|&p| self.members(p).to_vec()).collect(),
        }
    }

    /// Same patches with every center shifted by `offset`.
    pub fn with_centers_shifted(&self, offset: &Vec3) -> PatchSet {
        let mut out = self.clone();
        for c in &mut out.centers {
            *c += offset;
        }
        out
    }
}

/// Greedy farthest-point sampling starting from index 0. Ties go to the
/// lowest index.
pub fn farthest_point_sample(cloud: &PointCloud, n: usize) -> Result<Vec<usize>> {
    let pts = &cloud.points;
    if pts.len() < n {
        return Err(Error::TooFewPoints {
            needed: n,
            got: pts.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut chosen = Vec::with_capacity(n);
    let mut min_d2 = vec![f64::INFINITY; pts.len()];
    let mut last = 0usize;
    chosen.push(last);
    min_d2[last] = -1.0;
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, p) in pts.iter().enumerate() {
            if min_d2[i] < 0.0 {
                continue;
            }
            let d = (p - pts[last]).norm_squared();
            if d < min_d2[i] {
                min_d2[i] = d;
            }
            if min_d2[i] > best_d {
                best_d = min_d2[i];
                best = i;
            }
        }
        last = best;
        min_d2[last] = -1.0;
        chosen.push(last);
    }
    Ok(chosen)
}

/// `k` nearest indices to `query`, ascending by distance then index.
pub fn knn(cloud: &PointCloud, query: &Vec3, k: usize) -> Result<Vec<usize>> {
    let pts = &cloud.points;
    if pts.len() < k {
        return Err(Error::TooFewPoints {
            needed: k,
            got: pts.len(),
        });
    }
    let mut keyed: Vec<(f64, usize)> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| ((p - query).norm_squared(), i))
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < keyed.len() && k > 0 {
        keyed.select_nth_unstable_by(k - 1, by_key);
        keyed.truncate(k);
    }
    keyed.truncate(k);
    keyed.sort_unstable_by(by_key);
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

pub fn make_patches(cloud: &PointCloud, cfg: &PatchConfig) -> Result<PatchSet> {
    cfg.validate()?;
    if cloud.len() != cfg.n_points {
        return Err(Error::SizeMismatch {
            expected: cfg.n_points,
            got: cloud.len(),
        });
    }
    let center_indices = farthest_point_sample(cloud, cfg.n_patches)?;
    let k = cfg.patch_size;
    let mut centers = Vec::with_capacity(cfg.n_patches);
    let mut patches = Vec::with_capacity(cfg.n_patches * k);
    let mut member_indices = Vec::with_capacity(cfg.n_patches * k);
    for &ci in &center_indices {
        let c = cloud.points[ci];
        let members = knn(cloud, &c, k)?;
        patches.extend(members.iter().map(|&m| cloud.points[m] - c));
        member_indices.extend(members);
        centers.push(c);
    }
    Ok(PatchSet {
        patch_size: k,
        centers,
        center_indices,
        patches,
        member_indices,
    })
}
