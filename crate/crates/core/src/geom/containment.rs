use super::mesh::TriMesh;
use super::pose::Vec3;
use crate::error::Result;

/// Barycentric / parametric slack under which a ray hit counts as grazing an
/// edge or vertex.
const GRAZE_EPS: f64 = 1e-9;

// Irrational-looking directions so axis-aligned meshes never align with them.
const RAY_DIRS: [[f64; 3]; 3] = [
    [0.431_257_893_1, 0.573_621_384_7, 0.696_424_515_9],
    [-0.812_031_447_3, 0.219_768_552_1, 0.540_676_902_3],
    [0.157_432_109_8, -0.900_127_318_4, 0.406_118_733_5],
];

enum Cast {
    Clean(bool),
    Grazing(bool),
}

fn cast(p: &Vec3, dir: &Vec3, mesh: &TriMesh) -> Cast {
    let mut crossings = 0usize;
    let mut grazing = false;
    for [a, b, c] in mesh.triangles() {
        let e1 = b - a;
        let e2 = c - a;
        let h = dir.cross(&e2);
        let det = e1.dot(&h);
        let scale = e1.norm() * e2.norm();
        if det.abs() <= GRAZE_EPS * scale {
            // ray parallel to the face plane; only matters if it lies in it
            let n = e1.cross(&e2);
            if (p - a).dot(&n).abs() <= GRAZE_EPS * n.norm() {
                grazing = true;
            }
            continue;
        }
        let inv = 1.0 / det;
        let s = p - a;
        let u = s.dot(&h) * inv;
        if !(-GRAZE_EPS..=1.0 + GRAZE_EPS).contains(&u) {
            continue;
        }
        let q = s.cross(&e1);
        let v = dir.dot(&q) * inv;
        if v < -GRAZE_EPS || u + v > 1.0 + GRAZE_EPS {
            continue;
        }
        let t = e2.dot(&q) * inv;
        if t < -GRAZE_EPS {
            continue;
        }
        let w = 1.0 - u - v;
        if t.abs() <= GRAZE_EPS
            || u.abs() <= GRAZE_EPS
            || v.abs() <= GRAZE_EPS
            || w.abs() <= GRAZE_EPS
        {
            grazing = true;
        }
        if t > 0.0 && u >= 0.0 && v >= 0.0 && w >= 0.0 {
            crossings += 1;
        }
    }
    let inside = crossings % 2 == 1;
    if grazing {
        Cast::Grazing(inside)
    } else {
        Cast::Clean(inside)
    }
}

/// Ray-parity containment test. A ray that grazes an edge or vertex triggers
/// two more casts along alternate directions and the majority wins.
pub fn point_in_mesh(p: &Vec3, mesh: &TriMesh) -> Result<bool> {
    mesh.require_watertight()?;
    match mesh.aabb() {
        Some(b) if b.contains(p) => {}
        _ => return Ok(false),
    }
    Ok(contains_unchecked(p, mesh))
}

/// Containment without the watertight check; the caller guarantees it.
pub(crate) fn contains_unchecked(p: &Vec3, mesh: &TriMesh) -> bool {
    let dirs = RAY_DIRS.map(|d| Vec3::new(d[0], d[1], d[2]).normalize());
    match cast(p, &dirs[0], mesh) {
        Cast::Clean(inside) => inside,
        Cast::Grazing(first) => {
            let votes = [first]
                .into_iter()
                .chain(dirs[1..].iter().map(|d| match cast(p, d, mesh) {
                    Cast::Clean(b) | Cast::Grazing(b) => b,
                }))
                .filter(|&b| b)
                .count();
            votes >= 2
        }
    }
}

/// Containment for many points against one mesh; the bounding box is
/// computed once.
pub fn points_in_mesh(points: &[Vec3], mesh: &TriMesh) -> Result<Vec<bool>> {
    mesh.require_watertight()?;
    let Some(bb) = mesh.aabb() else {
        return Ok(vec![false; points.len()]);
    };
    Ok(points
        .iter()
        .map(|p| bb.contains(p) && contains_unchecked(p, mesh))
        .collect())
}
