//! Binary checkpoint layout (little endian):
//!
//! ```text
//! magic "LSCK" | version u32 | meta_len u64 | meta JSON
//! | n_values u64 | n_values × f64 parameter values | sha256 of all prior bytes
//! ```
//!
//! Parameter values follow `EncoderStack::params` order. Optimizer moments are
//! not stored; a checkpoint is a finished model.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{TrainConfig, TrainedModel};
use crate::error::{Error, Result};
use crate::objective::{EncoderConfig, EncoderStack};

const MAGIC: &[u8; 4] = b"LSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    config: TrainConfig,
    arch: EncoderConfig,
    data_fingerprint: String,
    loss_curve: Vec<f64>,
}

pub fn write_checkpoint<W: Write>(mut out: W, model: &TrainedModel) -> Result<()> {
    let meta = Meta {
        config: model.config.clone(),
        arch: model.arch.clone(),
        data_fingerprint: model.data_fingerprint.clone(),
        loss_curve: model.loss_curve.clone(),
    };
    let meta = serde_json::to_vec(&meta)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta);
    let values: Vec<f64> = model.stack.params().iter().flat_map(|p| p.value.data().iter().copied()).collect();
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::format("checkpoint truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Read a checkpoint; when `expected_fingerprint` is given, the stored data
/// fingerprint must match it.
pub fn read_checkpoint<R: Read>(mut input: R, expected_fingerprint: Option<&str>) -> Result<TrainedModel> {
    let mut all = Vec::new();
    input.read_to_end(&mut all)?;
    if all.len() < 32 {
        return Err(Error::format("checkpoint truncated"));
    }
    let (body, digest) = all.split_at(all.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::format("checkpoint checksum mismatch"));
    }
    let mut c = Cursor { buf: body, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::format("not a checkpoint file"));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let meta_len = c.u64()? as usize;
    let meta: Meta = serde_json::from_slice(c.take(meta_len)?)?;
    if let Some(expected) = expected_fingerprint {
        if expected != meta.data_fingerprint {
            return Err(Error::Data(format!(
                "checkpoint was trained on data {}, not {}",
                meta.data_fingerprint, expected
            )));
        }
    }
    let n = c.u64()? as usize;
    let raw = c.take(n.checked_mul(8).ok_or_else(|| Error::format("bad length"))?)?;
    let mut values = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));

    let mut stack = EncoderStack::new(meta.config.mode, &meta.arch, meta.config.temperature, 0)?;
    let expected: usize = stack.params().iter().map(|p| p.len()).sum();
    if expected != n {
        return Err(Error::format(format!("checkpoint holds {n} values, architecture needs {expected}")));
    }
    for p in stack.params_mut() {
        for v in p.value.data_mut() {
            *v = values.next().expect("length checked");
        }
    }
    Ok(TrainedModel {
        stack,
        loss_curve: meta.loss_curve,
        config: meta.config,
        arch: meta.arch,
        data_fingerprint: meta.data_fingerprint,
    })
}

pub fn save_checkpoint(path: &Path, model: &TrainedModel) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_checkpoint(std::io::BufWriter::new(f), model)
}

pub fn load_checkpoint(path: &Path, expected_fingerprint: Option<&str>) -> Result<TrainedModel> {
    read_checkpoint(std::fs::File::open(path)?, expected_fingerprint)
}
