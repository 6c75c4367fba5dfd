//! Quasi-static resting orientations of rigid meshes and episode sampling.

use std::collections::HashMap;

use nalgebra::{UnitQuaternion, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Pose, Rotation, TriMesh, Vec3};

pub type Vec2 = Vector2<f64>;

/// Distance below the lowest vertex that still counts as touching the table.
pub const SUPPORT_TOL: f64 = 1e-6;
pub const DEFAULT_MARGIN: f64 = 0.002;
/// Minimum planar distance between episode start and goal.
pub const MIN_SEPARATION: f64 = 0.1;
pub const MAX_EPISODE_ATTEMPTS: usize = 100;

/// Center of mass and volume of a closed mesh of uniform density.
pub fn com_and_volume(mesh: &TriMesh) -> Result<(Vec3, f64)> {
    mesh.require_watertight()?;
    let mut vol = 0.0;
    let mut moment = Vec3::zeros();
    for [a, b, c] in mesh.triangles() {
        let v = a.dot(&b.cross(&c)) / 6.0;
        vol += v;
        moment += v * (a + b + c) / 4.0;
    }
    if !(vol > 0.0) {
        return Err(Error::NonPositiveVolume(vol));
    }
    Ok((moment / vol, vol))
}

/// Outward-oriented triangle facets of the 3D convex hull.
#[derive(Debug, Clone, PartialEq)]
pub struct Hull3 {
    pub points: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl Hull3 {
    pub fn normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f].map(|i| self.points[i]);
        (b - a).cross(&(c - a)).normalize()
    }
}

struct HullFace {
    v: [usize; 3],
    n: Vec3,
    d: f64,
    alive: bool,
}

fn make_face(p: &[Vec3], v: [usize; 3]) -> HullFace {
    let n = (p[v[1]] - p[v[0]]).cross(&(p[v[2]] - p[v[0]])).normalize();
    HullFace {
        v,
        n,
        d: n.dot(&p[v[0]]),
        alive: true,
    }
}

/// Incremental convex hull. Points within a scale-relative tolerance of a
/// face are treated as inside.
pub fn convex_hull_3d(points: &[Vec3]) -> Result<Hull3> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let bb = Aabb::from_points(points).expect("non-empty");
    let scale = bb.extent().amax().max(f64::MIN_POSITIVE);
    let eps = 1e-9 * scale;
    // initial simplex
    let i0 = (0..points.len())
        .min_by(|&a, &b| points[a].x.total_cmp(&points[b].x).then(a.cmp(&b)))
        .expect("non-empty");
    let far = |f: &dyn Fn(&Vec3) -> f64| {
        (0..points.len())
            .max_by(|&a, &b| f(&points[a]).total_cmp(&f(&points[b])).then(b.cmp(&a)))
            .expect("non-empty")
    };
    let i1 = far(&|p| (p - points[i0]).norm_squared());
    let axis = (points[i1] - points[i0]).normalize();
    let i2 = far(&|p| (p - points[i0]).cross(&axis).norm_squared());
    let pn = (points[i1] - points[i0]).cross(&(points[i2] - points[i0]));
    if pn.norm() <= eps * scale {
        return Err(Error::DegenerateGeometry("collinear point set"));
    }
    let pn = pn.normalize();
    let i3 = far(&|p| (p - points[i0]).dot(&pn).abs());
    if (points[i3] - points[i0]).dot(&pn).abs() <= eps {
        return Err(Error::DegenerateGeometry("coplanar point set"));
    }
    let centroid = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    let mut faces: Vec<HullFace> = Vec::new();
    for v in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let mut f = make_face(points, v);
        if f.n.dot(&centroid) - f.d > 0.0 {
            f = make_face(points, [v[0], v[2], v[1]]);
        }
        faces.push(f);
    }
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let index = |edges: &mut HashMap<(usize, usize), usize>, f: &HullFace, id: usize| {
        for k in 0..3 {
            edges.insert((f.v[k], f.v[(k + 1) % 3]), id);
        }
    };
    for (id, f) in faces.iter().enumerate() {
        index(&mut edges, f, id);
    }
    for (pi, p) in points.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&pi) {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&f| faces[f].alive && faces[f].n.dot(p) - faces[f].d > eps)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let is_visible = |f: usize| visible.binary_search(&f).is_ok();
        let mut horizon = Vec::new();
        for &f in &visible {
            let v = faces[f].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let other = edges[&(b, a)];
                if !is_visible(other) {
                    horizon.push((a, b));
                }
            }
        }
        for &f in &visible {
            faces[f].alive = false;
            let v = faces[f].v;
            for k in 0..3 {
                edges.remove(&(v[k], v[(k + 1) % 3]));
            }
        }
        for (a, b) in horizon {
            let f = make_face(points, [a, b, pi]);
            let id = faces.len();
            index(&mut edges, &f, id);
            faces.push(f);
        }
    }
    Ok(Hull3 {
        points: points.to_vec(),
        faces: faces.iter().filter(|f| f.alive).map(|f| f.v).collect(),
    })
}

fn cross2(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise 2D hull (monotone chain), collinear points dropped.
pub fn convex_hull_2d(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && cross2(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

/// Signed distance from `p` to the boundary of a CCW convex polygon,
/// positive inside.
pub fn polygon_margin(poly: &[Vec2], p: &Vec2) -> f64 {
    if poly.len() < 3 {
        return f64::NEG_INFINITY;
    }
    (0..poly.len())
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            cross2(&a, &b, p) / (b - a).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StablePose {
    /// Object-to-world rotation with the resting face down and yaw removed.
    pub rotation: Rotation,
    /// Height of the object origin above the table when resting.
    pub rest_height: f64,
    /// CCW support polygon in table coordinates, relative to the object
    /// origin's projection.
    pub support_polygon: Vec<[f64; 2]>,
    pub margin: f64,
}

impl StablePose {
    pub fn pose_at(&self, x: f64, y: f64, yaw: f64) -> Pose {
        Pose::new(
            Vec3::new(x, y, self.rest_height),
            Rotation::from_yaw(yaw) * self.rotation,
        )
    }
}

/// Removes the rotation about world z so that the object's x axis (or y,
/// when x is vertical) projects onto +x.
pub fn remove_yaw(r: &Rotation) -> Rotation {
    let mut v = r.rotate(&Vec3::x());
    if v.x.hypot(v.y) < 1e-6 {
        v = r.rotate(&Vec3::y());
    }
    Rotation::from_yaw(-v.y.atan2(v.x)) * *r
}

fn face_down(n: &Vec3) -> Rotation {
    let down = -Vec3::z();
    match UnitQuaternion::rotation_between(n, &down) {
        Some(q) => Rotation::from_unit_quaternion(q),
        // n points straight up
        None => Rotation::from_axis_angle(&Vec3::x(), std::f64::consts::PI),
    }
}

/// Rest height, support polygon and COM margin of `mesh` resting in
/// orientation `rot` on its lowest vertices.
pub fn support_analysis(mesh: &TriMesh, com: &Vec3, rot: &Rotation) -> Result<(f64, Vec<Vec2>, f64)> {
    let rotated: Vec<Vec3> = mesh.vertices().iter().map(|v| rot.rotate(v)).collect();
    let zmin = rotated.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
    if !zmin.is_finite() {
        return Err(Error::EmptyMesh);
    }
    let contact: Vec<Vec2> = rotated
        .iter()
        .filter(|v| v.z - zmin <= SUPPORT_TOL)
        .map(|v| Vec2::new(v.x, v.y))
        .collect();
    let poly = convex_hull_2d(&contact);
    let c = rot.rotate(com);
    let margin = polygon_margin(&poly, &Vec2::new(c.x, c.y));
    Ok((-zmin, poly, margin))
}

/// Enumerates resting orientations, one per yaw-equivalence class, whose
/// COM projection lies at least `margin_min` inside the support polygon.
pub fn stable_orientations(mesh: &TriMesh, margin_min: f64) -> Result<Vec<StablePose>> {
    let (com, _) = com_and_volume(mesh)?;
    let hull = convex_hull_3d(mesh.vertices())?;
    let mut out: Vec<StablePose> = Vec::new();
    let mut seen: Vec<UnitQuaternion<f64>> = Vec::new();
    for f in 0..hull.faces.len() {
        let rot = remove_yaw(&face_down(&hull.normal(f)));
        let q = *rot.quaternion();
        if seen.iter().any(|s| (s.coords - q.coords).norm().min((s.coords + q.coords).norm()) < 1e-6) {
            continue;
        }
        seen.push(q);
        let (rest_height, poly, margin) = support_analysis(mesh, &com, &rot)?;
        if poly.len() >= 3 && margin >= margin_min {
            out.push(StablePose {
                rotation: rot,
                rest_height,
                support_polygon: poly.iter().map(|p| [p.x, p.y]).collect(),
                margin,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub initial: Pose,
    pub goal: Pose,
    pub object_id: u32,
    pub initial_class: usize,
    pub goal_class: usize,
}

/// Start and goal poses on the table plane `z = 0`: uniform class, yaw and
/// workspace xy; the goal is redrawn until it is far enough from the start.
pub fn sample_episode<R: Rng + ?Sized>(
    stable: &[StablePose],
    workspace: &Aabb,
    object_id: u32,
    rng: &mut R,
) -> Result<EpisodeSpec> {
    if stable.is_empty() {
        return Err(Error::InvalidParameter("no stable poses to sample from".into()));
    }
    let draw = |rng: &mut R| {
        let k = rng.random_range(0..stable.len());
        let x = workspace.min.x + rng.random::<f64>() * (workspace.max.x - workspace.min.x);
        let y = workspace.min.y + rng.random::<f64>() * (workspace.max.y - workspace.min.y);
        let yaw = (rng.random::<f64>() * 2.0 - 1.0) * std::f64::consts::PI;
        (k, stable[k].pose_at(x, y, yaw))
    };
    let (initial_class, initial) = draw(rng);
    for _ in 0..MAX_EPISODE_ATTEMPTS {
        let (goal_class, goal) = draw(rng);
        let d = (goal.translation - initial.translation).xy().norm();
        if d >= MIN_SEPARATION {
            return Ok(EpisodeSpec {
                initial,
                goal,
                object_id,
                initial_class,
                goal_class,
            });
        }
    }
    Err(Error::WorkspaceTooSmall(MAX_EPISODE_ATTEMPTS))
}
