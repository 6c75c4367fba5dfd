//! Little-endian record file:
//!
//! ```text
//! header : "CORN" | u32 version | u64 record count
//! record : u32 object_id | u64 seed | 7×f32 pose | u16 n | n×3 f32 | n×u8 label
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::ContactRecord;
use crate::error::{Error, Result};

pub const DATASET_MAGIC: [u8; 4] = *b"CORN";
pub const DATASET_VERSION: u32 = 1;

pub fn write_records<W: Write>(records: &[ContactRecord], mut w: W) -> Result<()> {
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for r in records {
        if r.points.len() != r.labels.len() || r.points.len() > u16::MAX as usize {
            return Err(Error::SizeMismatch {
                expected: r.points.len(),
                got: r.labels.len(),
            });
        }
        w.write_all(&r.object_id.to_le_bytes())?;
        w.write_all(&r.seed.to_le_bytes())?;
        for v in r.gripper_pose {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(r.points.len() as u16).to_le_bytes())?;
        for p in &r.points {
            for v in p {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        let labels: Vec<u8> = r.labels.iter().map(|&l| l as u8).collect();
        w.write_all(&labels)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(records: &[ContactRecord], path: impl AsRef<Path>) -> Result<()> {
    write_records(records, BufWriter::new(File::create(path)?))
}

fn fill<R: Read>(r: &mut R, buf: &mut [u8], record: u64) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::TruncatedRecord(record),
        _ => Error::Io(e),
    })
}

fn take<const N: usize, R: Read>(r: &mut R, record: u64) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    fill(r, &mut b, record)?;
    Ok(b)
}

pub fn read_records<R: Read>(mut r: R) -> Result<Vec<ContactRecord>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let mut long = [0u8; 8];
    r.read_exact(&mut long)?;
    let count = u64::from_le_bytes(long);
    let mut out = Vec::with_capacity(count.min(1 << 16) as usize);
    for i in 0..count {
        let object_id = u32::from_le_bytes(take::<4, _>(&mut r, i)?);
        let seed = u64::from_le_bytes(take::<8, _>(&mut r, i)?);
        let mut gripper_pose = [0f32; 7];
        for v in &mut gripper_pose {
            *v = f32::from_le_bytes(take::<4, _>(&mut r, i)?);
        }
        let n = u16::from_le_bytes(take::<2, _>(&mut r, i)?) as usize;
        let mut raw = vec![0u8; n * 12];
        fill(&mut r, &mut raw, i)?;
        let points = raw
            .chunks_exact(12)
            .map(|c| {
                [
                    f32::from_le_bytes(c[0..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..8].try_into().unwrap()),
                    f32::from_le_bytes(c[8..12].try_into().unwrap()),
                ]
            })
            .collect();
        let mut lab = vec![0u8; n];
        fill(&mut r, &mut lab, i)?;
        let labels = lab
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidParameter(format!(
                    "record {i}: label byte {other} is not 0/1"
                ))),
            })
            .collect::<Result<Vec<bool>>>()?;
        out.push(ContactRecord {
            object_id,
            seed,
            gripper_pose,
            points,
            labels,
        });
    }
    Ok(out)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<ContactRecord>> {
    read_records(BufReader::new(File::open(path)?))
}
