use std::collections::HashMap;

use crate::geom::Vec3;

/// Uniform hash grid for fixed-radius queries. Cells are a hair larger than
/// the radius so every neighbor sits in the 27-cell block around a query.
#[derive(Debug, Clone)]
pub struct RadiusGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    radius2: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl<'a> RadiusGrid<'a> {
    pub fn new(points: &'a [Vec3], radius: f64) -> Self {
        let cell = radius * (1.0 + 1e-9);
        let mut cells: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(key(p, cell)).or_default().push(i);
        }
        RadiusGrid {
            points,
            cell,
            radius2: radius * radius,
            cells,
        }
    }

    fn for_each_candidate<F: FnMut(usize)>(&self, q: &Vec3, mut f: F) {
        let (x, y, z) = key(q, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(v) = self.cells.get(&(x + dx, y + dy, z + dz)) {
                        v.iter().for_each(|&i| f(i));
                    }
                }
            }
        }
    }

    /// Indices with `‖p − q‖² ≤ r²`, ascending.
    pub fn within(&self, q: &Vec3) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_candidate(q, |i| {
            if (self.points[i] - q).norm_squared() <= self.radius2 {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    pub fn count_within(&self, q: &Vec3) -> usize {
        let mut n = 0;
        self.for_each_candidate(q, |i| {
            if (self.points[i] - q).norm_squared() <= self.radius2 {
                n += 1;
            }
        });
        n
    }

    /// Closest point within the radius (ties to the lower index).
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.for_each_candidate(q, |i| {
            let d2 = (self.points[i] - q).norm_squared();
            if d2 <= self.radius2 {
                match best {
                    Some((bi, bd)) if bd < d2 || (bd == d2 && bi < i) => {}
                    _ => best = Some((i, d2)),
                }
            }
        });
        best
    }
}

fn key(p: &Vec3, cell: f64) -> (i64, i64, i64) {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}
