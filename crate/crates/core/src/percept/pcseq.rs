//! Point-cloud sequences: `PCSQ`, u32 version, u32 frame count, then per
//! frame u32 n and n×3 f32 (little-endian).

use std::io::{ErrorKind, Read, Write};

use crate::error::{Error, Result};
use crate::geom::{PointCloud, Vec3};

pub const PCSEQ_MAGIC: [u8; 4] = *b"PCSQ";
pub const PCSEQ_VERSION: u32 = 1;

pub fn write_pcseq<W: Write>(w: &mut W, frames: &[PointCloud]) -> Result<()> {
    w.write_all(&PCSEQ_MAGIC)?;
    w.write_all(&PCSEQ_VERSION.to_le_bytes())?;
    let count = u32::try_from(frames.len())
        .map_err(|_| Error::InvalidParameter("too many frames".into()))?;
    w.write_all(&count.to_le_bytes())?;
    for f in frames {
        let n = u32::try_from(f.len())
            .map_err(|_| Error::InvalidParameter("frame too large".into()))?;
        w.write_all(&n.to_le_bytes())?;
        for p in &f.points {
            for c in [p.x, p.y, p.z] {
                w.write_all(&(c as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_pcseq<R: Read>(r: &mut R) -> Result<Vec<PointCloud>> {
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if b4 != PCSEQ_MAGIC {
        return Err(Error::BadMagic(b4));
    }
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != PCSEQ_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    r.read_exact(&mut b4)?;
    let count = u32::from_le_bytes(b4);
    let mut frames = Vec::with_capacity(count.min(1 << 16) as usize);
    for i in 0..count as u64 {
        let trunc = |e: std::io::Error| {
            if e.kind() == ErrorKind::UnexpectedEof {
                Error::TruncatedRecord(i)
            } else {
                Error::Io(e)
            }
        };
        r.read_exact(&mut b4).map_err(trunc)?;
        let n = u32::from_le_bytes(b4) as usize;
        let mut raw = vec![0u8; n * 12];
        r.read_exact(&mut raw).map_err(trunc)?;
        let f = |k: usize| f32::from_le_bytes(raw[k..k + 4].try_into().expect("4 bytes")) as f64;
        let points = (0..n)
            .map(|j| Vec3::new(f(j * 12), f(j * 12 + 4), f(j * 12 + 8)))
            .collect();
        frames.push(PointCloud::new(points));
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_header() {
        let frames = vec![
            PointCloud::new(vec![Vec3::new(0.5, -0.25, 1.0), Vec3::new(2.0, 0.0, 0.125)]),
            PointCloud::new(vec![]),
        ];
        let mut buf = Vec::new();
        write_pcseq(&mut buf, &frames).unwrap();
        assert_eq!(&buf[..12], &[0x50, 0x43, 0x53, 0x51, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(buf.len(), 12 + 4 + 24 + 4);
        let back = read_pcseq(&mut buf.as_slice()).unwrap();
        assert_eq!(back[0].points, frames[0].points);
        assert!(back[1].is_empty());
        let cut = &buf[..buf.len() - 5];
        assert!(matches!(read_pcseq(&mut &cut[..]), Err(Error::TruncatedRecord(0))));
    }
}
