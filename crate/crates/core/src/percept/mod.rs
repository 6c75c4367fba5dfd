//! Object segmentation of a merged world-frame cloud and ICP pose tracking.

mod grid;
mod icp;
mod pcd;
mod pcseq;
mod track;

pub use grid::RadiusGrid;
pub use icp::{icp, IcpConfig, IcpMode, IcpResult};
pub use pcd::parse_pcd;
pub use pcseq::{read_pcseq, write_pcseq, PCSEQ_MAGIC, PCSEQ_VERSION};
pub use track::{track_step, TrackStep, TrackerConfig, TrackerState};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, PointCloud, Vec3};
use crate::patches::knn;

/// Plane through `point` with unit `normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub point: Vec3,
    pub normal: Vec3,
}

impl Plane {
    pub fn new(point: Vec3, normal: Vec3) -> Result<Self> {
        if (normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("plane normal must be unit".into()));
        }
        Ok(Plane { point, normal })
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (p - self.point).dot(&self.normal)
    }
}

/// Convex region as the intersection of halfspaces `n·x ≤ d` (outward `n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexHull {
    pub halfspaces: Vec<(Vec3, f64)>,
}

pub const HULL_MARGIN: f64 = 1e-6;

impl ConvexHull {
    pub fn from_aabb(b: &Aabb) -> Self {
        let mut halfspaces = Vec::with_capacity(6);
        for k in 0..3 {
            let mut n = Vec3::zeros();
            n[k] = 1.0;
            halfspaces.push((n, b.max[k]));
            halfspaces.push((-n, -b.min[k]));
        }
        ConvexHull { halfspaces }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.halfspaces.iter().all(|(n, d)| n.dot(p) - d <= HULL_MARGIN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub workspace: Aabb,
    pub table: Plane,
    pub table_eps: f64,
    pub outlier_radius: f64,
    pub outlier_min_neighbors: usize,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub n_track: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            workspace: Aabb {
                min: Vec3::new(-0.5, -0.5, -0.05),
                max: Vec3::new(0.5, 0.5, 0.5),
            },
            table: Plane {
                point: Vec3::zeros(),
                normal: Vec3::z(),
            },
            table_eps: 0.01,
            outlier_radius: 0.02,
            outlier_min_neighbors: 96,
            dbscan_eps: 0.01,
            dbscan_min_pts: 4,
            n_track: 2048,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let lengths = [self.table_eps, self.outlier_radius, self.dbscan_eps];
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidParameter("segmentation lengths must be positive".into()));
        }
        if self.outlier_min_neighbors == 0 || self.dbscan_min_pts == 0 || self.n_track == 0 {
            return Err(Error::InvalidParameter("segmentation counts must be positive".into()));
        }
        Plane::new(self.table.point, self.table.normal)?;
        Ok(())
    }
}

/// Keeps points inside the (closed) box.
pub fn crop_workspace(cloud: &PointCloud, aabb: &Aabb) -> PointCloud {
    cloud.filter(|_, p| aabb.contains(p))
}

/// Drops points with `|signed distance| < eps` to the plane.
pub fn remove_table(cloud: &PointCloud, plane: &Plane, eps: f64) -> PointCloud {
    cloud.filter(|_, p| plane.signed_distance(p).abs() >= eps)
}

/// Drops points inside any of the hulls.
pub fn remove_robot(cloud: &PointCloud, hulls: &[ConvexHull]) -> PointCloud {
    cloud.filter(|_, p| !hulls.iter().any(|h| h.contains(p)))
}

/// Keeps points with at least `n_min` other points within `r` (inclusive).
pub fn radius_outlier_removal(cloud: &PointCloud, r: f64, n_min: usize) -> Result<PointCloud> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter("outlier radius must be positive".into()));
    }
    let grid = RadiusGrid::new(&cloud.points, r);
    // the count includes the point itself
    let keep: Vec<bool> = cloud.points.iter().map(|p| grid.count_within(p) > n_min).collect();
    Ok(cloud.filter(|i, _| keep[i]))
}

pub const NOISE: i32 = -1;

/// Density clustering. A point is core when at least `min_pts` points
/// (itself included) lie within `eps`. Core points reachable from each other
/// form a cluster; a border point joins the cluster of its nearest core
/// neighbor (ties to the lower index); the rest are [`NOISE`]. Clusters are
/// numbered in order of their lowest member index.
pub fn dbscan(points: &[Vec3], eps: f64, min_pts: usize) -> Result<Vec<i32>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("dbscan eps must be positive".into()));
    }
    let n = points.len();
    let grid = RadiusGrid::new(points, eps);
    let neighbors: Vec<Vec<usize>> = points.iter().map(|p| grid.within(p)).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut label = vec![NOISE; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if !core[s] || label[s] != NOISE {
            continue;
        }
        label[s] = next;
        stack.push(s);
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if core[j] && label[j] == NOISE {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let best = neighbors[i]
            .iter()
            .filter(|&&j| core[j])
            .map(|&j| ((points[j] - points[i]).norm_squared(), j))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, j)) = best {
            label[i] = label[j];
        }
    }
    Ok(canonical_labels(&label))
}

/// Renumbers cluster ids by first appearance; noise stays −1.
pub fn canonical_labels(labels: &[i32]) -> Vec<i32> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l < 0 {
                NOISE
            } else {
                let n = map.len() as i32;
                *map.entry(l).or_insert(n)
            }
        })
        .collect()
}

/// PCA normals from `k` nearest neighbors (the point included), flipped to
/// face `viewpoint`.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: &Vec3) -> Result<PointCloud> {
    if k < 3 || cloud.len() < k + 1 {
        return Err(Error::TooFewPoints {
            needed: k.max(3) + 1,
            got: cloud.len(),
        });
    }
    let mut normals = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        let nb = knn(cloud, p, k)?;
        let mean = nb.iter().map(|&i| cloud.points[i]).sum::<Vec3>() / k as f64;
        let mut cov = Matrix3::zeros();
        for &i in &nb {
            let d = cloud.points[i] - mean;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("3 eigenvalues");
        let mut n: Vec3 = eig.eigenvectors.column(imin).into_owned();
        let norm = n.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateGeometry("normal estimation"));
        }
        n /= norm;
        if n.dot(&(viewpoint - p)) < 0.0 {
            n = -n;
        }
        normals.push(n);
    }
    PointCloud::with_normals(cloud.points.clone(), normals)
}

/// Full object segmentation: crop, table, robot, outliers, then the largest
/// DBSCAN cluster (ties to the lower cluster id).
pub fn segment(
    cloud: &PointCloud,
    cfg: &SegmentationConfig,
    robot: &[ConvexHull],
) -> Result<PointCloud> {
    cfg.validate()?;
    let c = crop_workspace(cloud, &cfg.workspace);
    let c = remove_table(&c, &cfg.table, cfg.table_eps);
    let c = remove_robot(&c, robot);
    let c = radius_outlier_removal(&c, cfg.outlier_radius, cfg.outlier_min_neighbors)?;
    let labels = dbscan(&c.points, cfg.dbscan_eps, cfg.dbscan_min_pts)?;
    let n_clusters = labels.iter().copied().max().map_or(0, |m| (m + 1) as usize);
    if n_clusters == 0 {
        return Ok(PointCloud::new(Vec::new()));
    }
    let mut sizes = vec![0usize; n_clusters];
    for &l in labels.iter().filter(|&&l| l >= 0) {
        sizes[l as usize] += 1;
    }
    let best = (0..n_clusters)
        .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
        .expect("non-empty") as i32;
    Ok(c.filter(|i, _| labels[i] == best))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_filter_boundaries() {
        let plane = Plane::new(Vec3::zeros(), Vec3::z()).unwrap();
        let pc = PointCloud::new(vec![
            Vec3::new(0.3, 0.1, 0.0),
            Vec3::new(0.0, 0.0, 0.02),
            Vec3::new(0.0, 0.0, -0.005),
        ]);
        let out = remove_table(&pc, &plane, 0.01);
        assert_eq!(out.points, vec![Vec3::new(0.0, 0.0, 0.02)]);
    }

    #[test]
    fn hull_contains_origin() {
        let h = ConvexHull::from_aabb(&Aabb::from_center_half_extents(Vec3::zeros(), Vec3::repeat(0.5)).unwrap());
        let pc = PointCloud::new(vec![Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)]);
        assert_eq!(remove_robot(&pc, &[h]).points, vec![Vec3::new(2.0, 0.0, 0.0)]);
    }

    #[test]
    fn isolated_point_is_outlier() {
        let pc = PointCloud::new(vec![Vec3::zeros()]);
        assert!(radius_outlier_removal(&pc, 0.02, 1).unwrap().is_empty());
    }

    #[test]
    fn two_blobs_two_clusters() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let p = Vec3::new(i as f64 * 0.004, j as f64 * 0.004, 0.0);
                pts.push(p);
                pts.push(p + Vec3::new(0.1, 0.0, 0.0));
            }
        }
        let labels = dbscan(&pts, 0.01, 4).unwrap();
        assert_eq!(labels[0], 0);
        assert_eq!(labels[1], 1);
        assert_eq!(labels.iter().copied().max(), Some(1));
        assert!(labels.iter().all(|&l| l >= 0));
    }

    #[test]
    fn single_point_is_noise() {
        assert_eq!(dbscan(&[Vec3::zeros()], 0.01, 4).unwrap(), vec![NOISE]);
    }

    #[test]
    fn planar_normals() {
        let pts: Vec<Vec3> = (0..100)
            .map(|i| Vec3::new((i % 10) as f64 * 0.01, (i / 10) as f64 * 0.01, 0.2))
            .collect();
        let pc = estimate_normals(&PointCloud::new(pts), 8, &Vec3::new(0.0, 0.0, 1.0)).unwrap();
        for n in pc.normals.unwrap() {
            assert!((n - Vec3::z()).norm() < 1e-3);
        }
    }

    #[test]
    fn normals_need_enough_points() {
        let pc = PointCloud::new(vec![Vec3::zeros(); 5]);
        assert!(matches!(
            estimate_normals(&pc, 8, &Vec3::zeros()),
            Err(Error::TooFewPoints { .. })
        ));
    }
}
