//! Minimal reader for ASCII `.pcd` files: `x y z` columns are taken, any
//! other fields are ignored.

use crate::error::{Error, Result};
use crate::geom::{PointCloud, Vec3};

pub fn parse_pcd(src: &str) -> Result<PointCloud> {
    let mut fields: Vec<String> = Vec::new();
    let mut lines = src.lines().enumerate();
    for (i, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("FIELDS") => fields = it.map(str::to_string).collect(),
            Some("DATA") => {
                if it.next() != Some("ascii") {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: "only DATA ascii is supported".into(),
                    });
                }
                break;
            }
            _ => {}
        }
    }
    let col = |name: &str| {
        fields.iter().position(|f| f == name).ok_or(Error::Parse {
            line: 0,
            msg: format!("missing field {name}"),
        })
    };
    let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
    let mut points = Vec::new();
    for (i, line) in lines {
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.is_empty() {
            continue;
        }
        let get = |c: usize| -> Result<f64> {
            vals.get(c).and_then(|v| v.parse().ok()).ok_or(Error::Parse {
                line: i + 1,
                msg: "bad point row".into(),
            })
        };
        let p = Vec3::new(get(cx)?, get(cy)?, get(cz)?);
        // NaN marks invalid returns in organized clouds
        if p.iter().all(|v| v.is_finite()) {
            points.push(p);
        }
    }
    Ok(PointCloud::new(points))
}
