//! Little-endian tensor archive: `CKPT`, u32 version, then records of
//! u16 name length, UTF-8 name, u8 rank, u32 dims, f64 values — until EOF.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::patches::PatchConfig;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const CONFIG_TENSOR: &str = "config";

pub fn write_tensors<W: Write>(w: &mut W, tensors: &[(String, &Tensor)]) -> Result<()> {
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for (name, t) in tensors {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len())
            .map_err(|_| Error::InvalidParameter(format!("tensor name too long: {name}")))?;
        let rank = u8::try_from(t.shape.len())
            .map_err(|_| Error::InvalidParameter(format!("tensor rank too large: {name}")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&[rank])?;
        for &d in &t.shape {
            let d = u32::try_from(d)
                .map_err(|_| Error::InvalidParameter(format!("dimension too large: {name}")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tensors<R: Read>(r: &mut R) -> Result<BTreeMap<String, Tensor>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let mut out = BTreeMap::new();
    let mut index = 0u64;
    loop {
        let mut len = [0u8; 2];
        // clean EOF is only allowed on a record boundary
        match r.read(&mut len[..1]) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
        let trunc = |e: std::io::Error| {
            if e.kind() == ErrorKind::UnexpectedEof {
                Error::TruncatedRecord(index)
            } else {
                Error::Io(e)
            }
        };
        r.read_exact(&mut len[1..]).map_err(trunc)?;
        let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
        r.read_exact(&mut name).map_err(trunc)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Config(format!("tensor {index} has a non-UTF-8 name")))?;
        let mut rank = [0u8; 1];
        r.read_exact(&mut rank).map_err(trunc)?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            r.read_exact(&mut buf4).map_err(trunc)?;
            shape.push(u32::from_le_bytes(buf4) as usize);
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw).map_err(trunc)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        out.insert(name, Tensor::from_vec(&shape, data)?);
        index += 1;
    }
    Ok(out)
}

fn config_tensor(cfg: &EncoderConfig) -> Tensor {
    let v = [
        cfg.d_model,
        cfg.n_layers,
        cfg.n_heads,
        cfg.ffn_dim,
        cfg.patch.n_points,
        cfg.patch.n_patches,
        cfg.patch.patch_size,
        cfg.hand_dim,
        cfg.decoder_hidden,
    ];
    Tensor::from_vec(&[v.len()], v.iter().map(|&x| x as f64).collect()).expect("1-d shape")
}

/// Recovers the encoder configuration stored alongside the weights.
pub fn config_from_tensors(named: &BTreeMap<String, Tensor>) -> Result<EncoderConfig> {
    let t = named
        .get(CONFIG_TENSOR)
        .ok_or_else(|| Error::Config("checkpoint has no config tensor".into()))?;
    if t.data.len() != 9 || t.data.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
        return Err(Error::Config("malformed config tensor".into()));
    }
    let u: Vec<usize> = t.data.iter().map(|&v| v as usize).collect();
    let cfg = EncoderConfig {
        d_model: u[0],
        n_layers: u[1],
        n_heads: u[2],
        ffn_dim: u[3],
        patch: PatchConfig {
            n_points: u[4],
            n_patches: u[5],
            patch_size: u[6],
        },
        hand_dim: u[7],
        decoder_hidden: u[8],
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Encoder tensors (plus any `extra`, e.g. a policy head) with the config.
pub fn checkpoint_tensors<'a>(
    params: &'a EncoderParams,
    extra: &[(String, &'a Tensor)],
    config: &'a Tensor,
) -> Vec<(String, &'a Tensor)> {
    let mut all = vec![(CONFIG_TENSOR.to_string(), config)];
    all.extend(params.named_tensors());
    all.extend(extra.iter().cloned());
    all
}

pub fn write_checkpoint(
    path: &Path,
    params: &EncoderParams,
    extra: &[(String, &Tensor)],
) -> Result<()> {
    let cfg = config_tensor(&params.cfg);
    let all = checkpoint_tensors(params, extra, &cfg);
    let mut w = BufWriter::new(File::create(path)?);
    write_tensors(&mut w, &all)?;
    w.flush()?;
    Ok(())
}

/// Loads encoder weights; the full tensor map is returned for extra heads.
pub fn read_checkpoint(path: &Path) -> Result<(EncoderParams, BTreeMap<String, Tensor>)> {
    let named = read_tensors(&mut BufReader::new(File::open(path)?))?;
    let cfg = config_from_tensors(&named)?;
    let params = EncoderParams::from_named(cfg, &named)?;
    Ok((params, named))
}
