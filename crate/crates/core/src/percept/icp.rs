use nalgebra::{Matrix3, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use super::RadiusGrid;
use crate::error::{Error, Result};
use crate::geom::{PointCloud, Pose, Rotation, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcpMode {
    PointToPlane,
    PointToPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    pub mode: IcpMode,
    pub max_correspondence_distance: f64,
    pub max_iters: usize,
    /// Stop once an update moves less than this (meters / radians).
    pub tolerance: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            mode: IcpMode::PointToPlane,
            max_correspondence_distance: 0.01,
            max_iters: 50,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    /// Maps source points onto the target.
    pub pose: Pose,
    /// Fraction of source points with a target point within the
    /// correspondence distance, at the returned pose.
    pub fitness: f64,
    /// Mean correspondence distance at the returned pose.
    pub residual: f64,
    pub iterations: usize,
}

struct Matches {
    pairs: Vec<(usize, usize)>,
    mean_dist: f64,
}

fn correspond(src: &[Vec3], grid: &RadiusGrid<'_>, tgt: &[Vec3], pose: &Pose) -> Matches {
    let mut pairs = Vec::new();
    let mut sum = 0.0;
    for (i, p) in src.iter().enumerate() {
        let q = pose.transform_point(p);
        if let Some((j, _)) = grid.nearest(&q) {
            sum += (q - tgt[j]).norm();
            pairs.push((i, j));
        }
    }
    let mean_dist = if pairs.is_empty() { f64::INFINITY } else { sum / pairs.len() as f64 };
    Matches { pairs, mean_dist }
}

/// Linearized point-to-plane step: `[ω; t]` minimizing
/// `Σ ((p + ω×p + t − q)·n)²`.
fn plane_step(src: &[Vec3], tgt: &[Vec3], normals: &[Vec3], pose: &Pose, m: &Matches) -> Option<Pose> {
    let mut a = Matrix6::zeros();
    let mut b = Vector6::zeros();
    for &(i, j) in &m.pairs {
        let p = pose.transform_point(&src[i]);
        let n = normals[j];
        let c = p.cross(&n);
        let row = Vector6::new(c.x, c.y, c.z, n.x, n.y, n.z);
        let r = (p - tgt[j]).dot(&n);
        a += row * row.transpose();
        b -= row * r;
    }
    let x = a.cholesky()?.solve(&b);
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let step = Pose::new(
        Vec3::new(x[3], x[4], x[5]),
        Rotation::from_scaled_axis(&Vec3::new(x[0], x[1], x[2])),
    );
    Some(step.compose(pose))
}

/// Closed-form rigid alignment of matched pairs (SVD of the covariance).
fn point_step(src: &[Vec3], tgt: &[Vec3], pose: &Pose, m: &Matches) -> Option<Pose> {
    let n = m.pairs.len() as f64;
    if m.pairs.len() < 3 {
        return None;
    }
    let ps: Vec<Vec3> = m.pairs.iter().map(|&(i, _)| pose.transform_point(&src[i])).collect();
    let cp = ps.iter().sum::<Vec3>() / n;
    let cq = m.pairs.iter().map(|&(_, j)| tgt[j]).sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (p, &(_, j)) in ps.iter().zip(&m.pairs) {
        h += (p - cp) * (tgt[j] - cq).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let mut d = Matrix3::identity();
    if (vt.transpose() * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = vt.transpose() * d * u.transpose();
    let rot = Rotation::from_matrix(&r);
    let step = Pose::new(cq - rot.rotate(&cp), rot);
    Some(step.compose(pose))
}

/// Registers `src` onto `tgt` starting from `init`. Steps that would raise
/// the mean correspondence distance are rejected and end the iteration.
pub fn icp(src: &PointCloud, tgt: &PointCloud, init: &Pose, cfg: &IcpConfig) -> Result<IcpResult> {
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::NoCorrespondences(cfg.max_correspondence_distance));
    }
    if !(cfg.max_correspondence_distance > 0.0) {
        return Err(Error::InvalidParameter("correspondence distance must be positive".into()));
    }
    let normals = match cfg.mode {
        IcpMode::PointToPlane => Some(
            tgt.normals
                .as_ref()
                .ok_or(Error::InvalidParameter("point-to-plane ICP needs target normals".into()))?,
        ),
        IcpMode::PointToPoint => None,
    };
    let grid = RadiusGrid::new(&tgt.points, cfg.max_correspondence_distance);
    let mut pose = *init;
    let mut m = correspond(&src.points, &grid, &tgt.points, &pose);
    if m.pairs.is_empty() {
        return Err(Error::NoCorrespondences(cfg.max_correspondence_distance));
    }
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let next = match normals {
            Some(n) => plane_step(&src.points, &tgt.points, n, &pose, &m),
            None => point_step(&src.points, &tgt.points, &pose, &m),
        };
        let Some(next) = next else { break };
        let nm = correspond(&src.points, &grid, &tgt.points, &next);
        if nm.pairs.is_empty() || nm.mean_dist > m.mean_dist {
            break;
        }
        let (dt, dr) = pose.error_to(&next);
        pose = next;
        m = nm;
        if dt < cfg.tolerance && dr < cfg.tolerance {
            break;
        }
    }
    Ok(IcpResult {
        pose,
        fitness: m.pairs.len() as f64 / src.len() as f64,
        residual: m.mean_dist,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::primitives::cuboid;
    use crate::geom::sample_surface_points;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn self_registration_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pc = sample_surface_points(&cuboid(Vec3::new(0.05, 0.04, 0.03)), 500, &mut rng).unwrap();
        for mode in [IcpMode::PointToPlane, IcpMode::PointToPoint] {
            let cfg = IcpConfig {
                mode,
                ..IcpConfig::default()
            };
            let r = icp(&pc, &pc, &Pose::identity(), &cfg).unwrap();
            let (dt, dr) = r.pose.error_to(&Pose::identity());
            assert!(dt < 1e-9 && dr < 1e-9);
            assert_eq!(r.fitness, 1.0);
        }
    }

    #[test]
    fn far_apart_has_no_correspondences() {
        let a = PointCloud::new(vec![Vec3::zeros()]);
        let b = PointCloud::new(vec![Vec3::new(1.0, 0.0, 0.0)]);
        let cfg = IcpConfig {
            mode: IcpMode::PointToPoint,
            ..IcpConfig::default()
        };
        assert!(matches!(icp(&a, &b, &Pose::identity(), &cfg), Err(Error::NoCorrespondences(_))));
    }
}
