use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::cloud::Aabb;
use super::pose::{Pose, Vec3};
use crate::error::{Error, Result};

/// Faces with area below this are dropped at construction.
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Triangle surface. The watertight flag is computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    watertight: bool,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFiniteInput("mesh vertices"));
        }
        for f in &faces {
            if let Some(&bad) = f.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::InvalidParameter(format!(
                    "face index {bad} out of range for {} vertices",
                    vertices.len()
                )));
            }
        }
        let faces: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|f| triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]) >= MIN_FACE_AREA)
            .collect();
        let watertight = is_edge_manifold(&faces);
        Ok(TriMesh {
            vertices,
            faces,
            watertight,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn require_watertight(&self) -> Result<()> {
        if self.watertight {
            Ok(())
        } else {
            Err(Error::NotWatertight)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let f = self.faces[i];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    pub fn triangles(&self) -> impl Iterator<Item = [Vec3; 3]> + '_ {
        (0..self.faces.len()).map(move |i| self.triangle(i))
    }

    pub fn face_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        triangle_area(&a, &b, &c)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|i| self.face_area(i)).sum()
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(self.vertices.iter())
    }

    /// Applies a rigid transform; topology and the watertight flag carry over.
    pub fn transformed(&self, pose: &Pose) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| pose.transform_point(v)).collect(),
            faces: self.faces.clone(),
            watertight: self.watertight,
        }
    }

    pub fn translated(&self, t: &Vec3) -> TriMesh {
        self.transformed(&Pose::from_translation(*t))
    }

    pub fn scaled(&self, s: f64) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| v * s).collect(),
            faces: self.faces.clone(),
            watertight: self.watertight,
        }
    }

    /// Parses the `v x y z` / `f i j k` subset of Wavefront OBJ.
    pub fn from_obj_str(src: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (n, raw) in src.lines().enumerate() {
            let line = n + 1;
            let mut tok = raw.split_whitespace();
            match tok.next() {
                Some("v") => {
                    let xyz: Vec<f64> = tok
                        .take(3)
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::Parse {
                            line,
                            msg: e.to_string(),
                        })?;
                    if xyz.len() != 3 {
                        return Err(Error::Parse {
                            line,
                            msg: "vertex needs 3 coordinates".into(),
                        });
                    }
                    vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                }
                Some("f") => {
                    let idx: Vec<&str> = tok.collect();
                    if idx.len() != 3 {
                        return Err(Error::Parse {
                            line,
                            msg: format!("face has {} indices, expected 3", idx.len()),
                        });
                    }
                    let mut f = [0usize; 3];
                    for (k, t) in idx.iter().enumerate() {
                        let head = t.split('/').next().unwrap_or("");
                        let i: usize = head.parse().map_err(|_| Error::Parse {
                            line,
                            msg: format!("bad face index {t:?}"),
                        })?;
                        if i == 0 {
                            return Err(Error::Parse {
                                line,
                                msg: "face indices are 1-based".into(),
                            });
                        }
                        f[k] = i - 1;
                    }
                    faces.push(f);
                }
                _ => {}
            }
        }
        TriMesh::new(vertices, faces)
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_obj_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        s
    }
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn is_edge_manifold(faces: &[[usize; 3]]) -> bool {
    if faces.is_empty() {
        return false;
    }
    let mut edges: HashMap<(usize, usize), u32> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    edges.values().all(|&c| c == 2)
}

/// Closed primitive shapes with outward (counter-clockwise) winding.
pub mod primitives {
    use std::collections::HashMap;
    use std::f64::consts::PI;

    use super::TriMesh;
    use crate::geom::pose::Vec3;

    /// Axis-aligned box centered at the origin.
    pub fn cuboid(half: Vec3) -> TriMesh {
        let (x, y, z) = (half.x, half.y, half.z);
        let v = vec![
            Vec3::new(-x, -y, -z),
            Vec3::new(x, -y, -z),
            Vec3::new(x, y, -z),
            Vec3::new(-x, y, -z),
            Vec3::new(-x, -y, z),
            Vec3::new(x, -y, z),
            Vec3::new(x, y, z),
            Vec3::new(-x, y, z),
        ];
        let f = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        TriMesh::new(v, f).expect("cuboid is valid")
    }

    /// Side length 1, centered at the origin.
    pub fn unit_cube() -> TriMesh {
        cuboid(Vec3::repeat(0.5))
    }

    pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let verts = verts.into_iter().map(|v| v * radius).collect();
        TriMesh::new(verts, faces).expect("icosphere is valid")
    }

    /// Cylinder along z, centered at the origin.
    pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriMesh {
        let n = segments.max(3);
        let h = height / 2.0;
        let mut v = Vec::with_capacity(2 * n + 2);
        for i in 0..n {
            let a = 2.0 * PI * i as f64 / n as f64;
            v.push(Vec3::new(radius * a.cos(), radius * a.sin(), -h));
        }
        for i in 0..n {
            let a = 2.0 * PI * i as f64 / n as f64;
            v.push(Vec3::new(radius * a.cos(), radius * a.sin(), h));
        }
        let bottom = v.len();
        v.push(Vec3::new(0.0, 0.0, -h));
        let top = v.len();
        v.push(Vec3::new(0.0, 0.0, h));
        let mut f = Vec::with_capacity(4 * n);
        for i in 0..n {
            let j = (i + 1) % n;
            f.push([i, j, n + j]);
            f.push([i, n + j, n + i]);
            f.push([bottom, j, i]);
            f.push([top, n + i, n + j]);
        }
        TriMesh::new(v, f).expect("cylinder is valid")
    }

    /// Cone along z with its base at `-height/2`.
    pub fn cone(radius: f64, height: f64, segments: usize) -> TriMesh {
        let n = segments.max(3);
        let h = height / 2.0;
        let mut v: Vec<Vec3> = (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                Vec3::new(radius * a.cos(), radius * a.sin(), -h)
            })
            .collect();
        let base = v.len();
        v.push(Vec3::new(0.0, 0.0, -h));
        let apex = v.len();
        v.push(Vec3::new(0.0, 0.0, h));
        let mut f = Vec::with_capacity(2 * n);
        for i in 0..n {
            let j = (i + 1) % n;
            f.push([i, j, apex]);
            f.push([base, j, i]);
        }
        TriMesh::new(v, f).expect("cone is valid")
    }

    /// Extrudes a simple counter-clockwise polygon in the xy plane along z,
    /// centered on z = 0. Caps are ear-clipped.
    pub fn prism(polygon: &[(f64, f64)], height: f64) -> TriMesh {
        let n = polygon.len();
        let h = height / 2.0;
        let mut v: Vec<Vec3> = polygon.iter().map(|&(x, y)| Vec3::new(x, y, -h)).collect();
        v.extend(polygon.iter().map(|&(x, y)| Vec3::new(x, y, h)));
        let mut f = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            f.push([i, j, n + j]);
            f.push([i, n + j, n + i]);
        }
        for [a, b, c] in ear_clip(polygon) {
            f.push([n + a, n + b, n + c]);
            f.push([a, c, b]);
        }
        TriMesh::new(v, f).expect("prism is valid")
    }

    fn cross2(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    }

    /// Triangulates a simple counter-clockwise polygon without collinear
    /// consecutive vertices.
    pub(crate) fn ear_clip(poly: &[(f64, f64)]) -> Vec<[usize; 3]> {
        let mut idx: Vec<usize> = (0..poly.len()).collect();
        let mut tris = Vec::new();
        while idx.len() > 3 {
            let m = idx.len();
            let ear = (0..m).find(|&k| {
                let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
                let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
                if cross2(a, b, c) <= 0.0 {
                    return false;
                }
                idx.iter().all(|&j| {
                    if j == ia || j == ib || j == ic {
                        return true;
                    }
                    let p = poly[j];
                    !(cross2(a, b, p) >= 0.0 && cross2(b, c, p) >= 0.0 && cross2(c, a, p) >= 0.0)
                })
            });
            let k = ear.expect("polygon must be simple and counter-clockwise");
            tris.push([idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]]);
            idx.remove(k);
        }
        tris.push([idx[0], idx[1], idx[2]]);
        tris
    }

    /// L-shaped prism: a `2s × 2s` square with one `s × s` quadrant removed,
    /// extruded by `height`.
    pub fn l_prism(s: f64, height: f64) -> TriMesh {
        let poly = [
            (0.0, 0.0),
            (2.0 * s, 0.0),
            (2.0 * s, s),
            (s, s),
            (s, 2.0 * s),
            (0.0, 2.0 * s),
        ];
        prism(&poly, height)
    }

    /// Closed parallel-jaw hand as one T-shaped solid: a palm block with the
    /// closed fingers below it, pointing along -z. Origin at the finger tips.
    pub fn gripper() -> TriMesh {
        let (palm_w, palm_h) = (0.2, 0.05);
        let (finger_w, finger_h) = (0.04, 0.05);
        let depth = 0.06;
        let poly = [
            (-finger_w / 2.0, 0.0),
            (finger_w / 2.0, 0.0),
            (finger_w / 2.0, finger_h),
            (palm_w / 2.0, finger_h),
            (palm_w / 2.0, finger_h + palm_h),
            (-palm_w / 2.0, finger_h + palm_h),
            (-palm_w / 2.0, finger_h),
            (-finger_w / 2.0, finger_h),
        ];
        // extrude along y: map prism (x, y, z) -> (x, z, y) with orientation kept
        let m = prism(&poly, depth);
        let v = m.vertices().iter().map(|p| Vec3::new(p.x, -p.z, p.y)).collect();
        TriMesh::new(v, m.faces().to_vec()).expect("gripper is valid")
    }
}
