//! Versioned binary parameter files.
//!
//! Layout (little-endian): magic `SALSCKPT`, u32 version, u32 layer count, per layer
//! (u32 name length, name bytes, u32 in, u32 out, u32 kernel), u64 value count, f64 values,
//! then a 32-byte SHA-256 of everything before it.

use sha2::{Digest, Sha256};

use super::params::{LayerShape, PredictorParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SALSCKPT";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(params: &PredictorParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + params.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layers().len() as u32).to_le_bytes());
    for l in params.layers() {
        out.extend_from_slice(&(l.name.len() as u32).to_le_bytes());
        out.extend_from_slice(l.name.as_bytes());
        for d in [l.in_channels, l.out_channels, l.kernel] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end =
            end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<PredictorParams> {
    if bytes.len() < MAGIC.len() + 32 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    let mut c = Cursor {
        bytes: body,
        pos: MAGIC.len(),
    };
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_layers = c.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::Checkpoint("layer name is not utf-8".into()))?
            .to_string();
        let in_channels = c.u32()? as usize;
        let out_channels = c.u32()? as usize;
        let kernel = c.u32()? as usize;
        layers.push(LayerShape {
            name,
            in_channels,
            out_channels,
            kernel,
        });
    }
    let n = c.u64()? as usize;
    let raw = c.take(
        n.checked_mul(8)
            .ok_or_else(|| Error::Checkpoint("value count overflows".into()))?,
    )?;
    if c.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after values".into()));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    PredictorParams::from_parts(layers, values).ok_or_else(|| {
        Error::Checkpoint("layer shapes do not match the predictor architecture".into())
    })
}
