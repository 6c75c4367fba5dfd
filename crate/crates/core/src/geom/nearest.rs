use rand::Rng;

use super::mesh::TriMesh;
use super::pose::Vec3;
use super::sample::sample_surface_points;
use crate::error::{Error, Result};

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Exact nearest surface point over every triangle, with its distance.
pub fn nearest_point_on_mesh(p: &Vec3, mesh: &TriMesh) -> Result<(Vec3, f64)> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut best = (Vec3::zeros(), f64::INFINITY);
    for [a, b, c] in mesh.triangles() {
        let q = closest_point_on_triangle(p, &a, &b, &c);
        let d2 = (q - p).norm_squared();
        if d2 < best.1 {
            best = (q, d2);
        }
    }
    Ok((best.0, best.1.sqrt()))
}

/// Result of a sampled nearest-pair search between two surfaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestPair {
    /// Sample on the first surface.
    pub on_a: Vec3,
    /// Exact nearest point on the second surface.
    pub on_b: Vec3,
}

impl NearestPair {
    /// `on_b - on_a`; translating the second body by its negation brings the
    /// pair into contact.
    pub fn displacement(&self) -> Vec3 {
        self.on_b - self.on_a
    }
}

/// Nearest pair from a fixed sample set on `a` to the exact surface of `b`.
pub fn nearest_pair_from_samples(samples: &[Vec3], b: &TriMesh) -> Result<NearestPair> {
    if b.is_empty() || samples.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut best = NearestPair {
        on_a: samples[0],
        on_b: samples[0],
    };
    let mut best_d = f64::INFINITY;
    for s in samples {
        let (q, d) = nearest_point_on_mesh(s, b)?;
        if d < best_d {
            best_d = d;
            best = NearestPair { on_a: *s, on_b: q };
        }
    }
    Ok(best)
}

/// Displacement `b* - a*` between `m` surface samples of `a` and the exact
/// surface of `b`.
pub fn nearest_displacement<R: Rng + ?Sized>(
    a: &TriMesh,
    b: &TriMesh,
    m: usize,
    rng: &mut R,
) -> Result<Vec3> {
    if b.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if m == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    let samples = sample_surface_points(a, m, rng)?;
    Ok(nearest_pair_from_samples(&samples.points, b)?.displacement())
}
