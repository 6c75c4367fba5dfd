//! Independent reference implementations: brute force or closed form, no
//! shared code paths with the library beyond basic types.
#![allow(dead_code)]

use corn::control::SerialChain;
use corn::geom::{Pose, TriMesh, Vec3};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_cloud(n: usize, half: f64, rng: &mut impl Rng) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-half..half),
                rng.random_range(-half..half),
                rng.random_range(-half..half),
            )
        })
        .collect()
}

/// Gaussian blobs plus uniform background, the shape DBSCAN is meant for.
pub fn blob_cloud(n: usize, rng: &mut impl Rng) -> Vec<Vec3> {
    let n_blobs = rng.random_range(1..5);
    let centers = uniform_cloud(n_blobs, 0.1, rng);
    let s = Normal::new(0.0, 0.008).unwrap();
    (0..n)
        .map(|i| {
            if i % 5 == 4 {
                uniform_cloud(1, 0.15, rng)[0]
            } else {
                let c = centers[i % n_blobs];
                c + Vec3::new(s.sample(rng), s.sample(rng), s.sample(rng))
            }
        })
        .collect()
}

// ---------- triangles and meshes ----------

fn closest_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest point on a triangle: the plane projection when it falls inside
/// (barycentric test), otherwise the best of the three edges.
pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let n = (b - a).cross(&(c - a));
    let nn = n.norm_squared();
    let q = p - n * ((p - a).dot(&n) / nn);
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
    if inside {
        return q;
    }
    [
        closest_on_segment(p, a, b),
        closest_on_segment(p, b, c),
        closest_on_segment(p, c, a),
    ]
    .into_iter()
    .min_by(|x, y| (x - p).norm().total_cmp(&(y - p).norm()))
    .unwrap()
}

pub fn nearest_distance(p: &Vec3, mesh: &TriMesh) -> f64 {
    mesh.triangles()
        .map(|[a, b, c]| (closest_on_triangle(p, &a, &b, &c) - p).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Containment in a convex mesh from its face planes. `None` within `tol`
/// of any plane, where the answer is boundary-sensitive.
pub fn convex_contains(p: &Vec3, mesh: &TriMesh, tol: f64) -> Option<bool> {
    let centroid = mesh.vertices().iter().sum::<Vec3>() / mesh.vertices().len() as f64;
    let mut inside = true;
    for [a, b, c] in mesh.triangles() {
        let mut n = (b - a).cross(&(c - a)).normalize();
        if n.dot(&(centroid - a)) > 0.0 {
            n = -n;
        }
        let d = n.dot(&(p - a));
        if d.abs() < tol {
            return None;
        }
        inside &= d < 0.0;
    }
    Some(inside)
}

/// Built-in gripper as the union of two axis-aligned boxes in its own frame
/// (fingers below, palm above, 6 cm deep along y). `None` near a face.
pub fn gripper_contains(p_world: &Vec3, pose: &Pose, tol: f64) -> Option<bool> {
    let p = pose.inverse().transform_point(p_world);
    let boxes = [
        (Vec3::new(-0.02, -0.03, 0.0), Vec3::new(0.02, 0.03, 0.05)),
        (Vec3::new(-0.1, -0.03, 0.05), Vec3::new(0.1, 0.03, 0.1)),
    ];
    // signed distance of a box: negative inside
    let sd = |(lo, hi): &(Vec3, Vec3)| {
        (0..3)
            .map(|i| (lo[i] - p[i]).max(p[i] - hi[i]))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let d = boxes.iter().map(sd).fold(f64::INFINITY, f64::min);
    // points on the shared palm/finger face are interior, so only the
    // union's distance matters
    if d.abs() < tol {
        None
    } else {
        Some(d < 0.0)
    }
}

// ---------- point-cloud references ----------

pub fn knn(points: &[Vec3], q: &Vec3, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        (points[a] - q)
            .norm_squared()
            .total_cmp(&(points[b] - q).norm_squared())
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Farthest-point sampling by recomputing every distance from scratch.
pub fn fps(points: &[Vec3], n: usize) -> Vec<usize> {
    let mut chosen = vec![0usize];
    while chosen.len() < n {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, p) in points.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let d = chosen
                .iter()
                .map(|&c| (points[c] - p).norm_squared())
                .fold(f64::INFINITY, f64::min);
            if d > best.0 {
                best = (d, i);
            }
        }
        chosen.push(best.1);
    }
    chosen
}

fn within(points: &[Vec3], i: usize, r: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&j| (points[j] - points[i]).norm() <= r)
        .collect()
}

pub fn radius_outlier_keep(points: &[Vec3], r: f64, n_min: usize) -> Vec<bool> {
    (0..points.len())
        .map(|i| within(points, i, r).len() - 1 >= n_min)
        .collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// DBSCAN by union-find over all core pairs; borders take their nearest
/// core's cluster; ids renumbered by lowest member index.
pub fn dbscan(points: &[Vec3], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = points.len();
    let nb: Vec<Vec<usize>> = (0..n).map(|i| within(points, i, eps)).collect();
    let core: Vec<bool> = nb.iter().map(|v| v.len() >= min_pts).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for &j in &nb[i] {
            if core[i] && core[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut root: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if core[i] {
            root[i] = Some(find(&mut parent, i));
        } else {
            root[i] = nb[i]
                .iter()
                .filter(|&&j| core[j])
                .min_by(|&&a, &&b| {
                    (points[a] - points[i])
                        .norm_squared()
                        .total_cmp(&(points[b] - points[i]).norm_squared())
                        .then(a.cmp(&b))
                })
                .map(|&j| find(&mut parent, j));
        }
    }
    let mut ids = std::collections::HashMap::new();
    root.iter()
        .map(|r| match r {
            None => -1,
            Some(r) => {
                let k = ids.len() as i32;
                *ids.entry(*r).or_insert(k)
            }
        })
        .collect()
}

// ---------- rigid transforms ----------

/// Rotation angle of `R_a Rᵦᵀ` from the trace.
pub fn rotation_angle(a: &Pose, b: &Pose) -> f64 {
    let m = a.rotation.matrix() * b.rotation.matrix().transpose();
    ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Central-difference Jacobian: linear rows from FK positions, angular rows
/// from the rotation log of `R(q+h) R(q−h)ᵀ`.
pub fn fd_jacobian(chain: &SerialChain, q: &[f64], h: f64) -> DMatrix<f64> {
    let n = q.len();
    let mut j = DMatrix::zeros(6, n);
    for i in 0..n {
        let (mut qp, mut qm) = (q.to_vec(), q.to_vec());
        qp[i] += h;
        qm[i] -= h;
        let (a, b) = (chain.fk(&qp).unwrap(), chain.fk(&qm).unwrap());
        let dt = (a.translation - b.translation) / (2.0 * h);
        let dr = (a.rotation * b.rotation.inverse()).scaled_axis() / (2.0 * h);
        for r in 0..3 {
            j[(r, i)] = dt[r];
            j[(r + 3, i)] = dr[r];
        }
    }
    j
}

pub fn random_q(rng: &mut impl Rng) -> Vec<f64> {
    (0..7).map(|_| rng.random_range(-1.5..1.5)).collect()
}

pub fn jacobian_max_error(seeds: u64) -> f64 {
    let arm = SerialChain::franka_like();
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let q = random_q(&mut rng(seed));
        let j = arm.jacobian(&q).unwrap();
        let fd = fd_jacobian(&arm, &q, 1e-6);
        for c in 0..7 {
            let e = (j.column(c) - fd.column(c)).amax();
            worst = worst.max(e);
        }
    }
    worst
}

/// (off-boundary points checked, mismatches, boundary points skipped)
pub fn analytic_label_check(records: &[corn::contactgen::ContactRecord]) -> (usize, usize, usize) {
    let (mut checked, mut bad, mut skipped) = (0, 0, 0);
    for r in records {
        let pose = r.pose().unwrap();
        for (p, &l) in r.points_f64().iter().zip(&r.labels) {
            match gripper_contains(p, &pose, 1e-9) {
                Some(want) => {
                    checked += 1;
                    bad += (want != l) as usize;
                }
                None => skipped += 1,
            }
        }
    }
    (checked, bad, skipped)
}

/// COM margin from hull edges found by brute force: a pair of contact
/// points is an edge when no other contact point lies strictly outside it.
pub fn support_margin(contact: &[(f64, f64)], c: (f64, f64)) -> f64 {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut best = f64::INFINITY;
    for i in 0..contact.len() {
        for j in 0..contact.len() {
            let (a, b) = (contact[i], contact[j]);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            if len < 1e-9 {
                continue;
            }
            if contact.iter().all(|&p| cross(a, b, p) >= -1e-12) {
                best = best.min(cross(a, b, c) / len);
            }
        }
    }
    best
}
