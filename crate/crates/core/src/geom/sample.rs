use rand::Rng;

use super::cloud::PointCloud;
use super::mesh::TriMesh;
use super::pose::{Rotation, Vec3};
use crate::error::{Error, Result};

/// Area-weighted uniform surface sampling. Each point carries its face normal.
pub fn sample_surface_points<R: Rng + ?Sized>(
    mesh: &TriMesh,
    n: usize,
    rng: &mut R,
) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut cdf = Vec::with_capacity(mesh.faces().len());
    let mut acc = 0.0;
    for i in 0..mesh.faces().len() {
        acc += mesh.face_area(i);
        cdf.push(acc);
    }
    let total = acc;
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * total;
        let face = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let [a, b, c] = mesh.triangle(face);
        let r1 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        points.push(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
        normals.push((b - a).cross(&(c - a)).normalize());
    }
    PointCloud::with_normals(points, normals)
}

/// Uniform rotation via Shoemake's subgroup algorithm.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let u3: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    Rotation::from_xyzw(a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos())
        .expect("unit by construction")
}

/// Uniform direction on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.random::<f64>() * 2.0 - 1.0;
    let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geom::mesh::primitives::unit_cube;

    #[test]
    fn cube_points_on_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pc = sample_surface_points(&unit_cube(), 512, &mut rng).unwrap();
        assert_eq!(pc.len(), 512);
        for p in &pc.points {
            let m = p.x.abs().max(p.y.abs()).max(p.z.abs());
            assert!((m - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_mesh_is_empty() {
        let v = vec![Vec3::zeros(), Vec3::new(1e-7, 0.0, 0.0), Vec3::new(0.0, 1e-7, 0.0)];
        let m = TriMesh::new(v, vec![[0, 1, 2]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_surface_points(&m, 4, &mut rng),
            Err(Error::EmptyMesh)
        ));
    }

    #[test]
    fn seeded_sampling_reproducible() {
        let m = unit_cube();
        let a = sample_surface_points(&m, 64, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_surface_points(&m, 64, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
