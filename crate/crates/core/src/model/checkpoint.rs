//! Versioned, checksummed binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "AMDNCKPT"
//! version    u32
//! header_len u64
//! header     JSON      spec, epoch, seed, optimizer step, tensor names and shapes
//! payload    f64 LE    parameters in canonical order, then batch-norm running
//!                      means and variances per block, then Adam m and v tensors
//! checksum   32 bytes  SHA-256 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{build_model, ModelState};
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AMDNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    epoch: usize,
    seed: u64,
    optimizer_step: u64,
    has_moments: bool,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(state: &ModelState) -> Result<Vec<u8>> {
    let tensors = state
        .params
        .names()
        .into_iter()
        .zip(state.params.tensors())
        .map(|(name, t)| TensorEntry {
            name,
            shape: t.shape().to_vec(),
        })
        .collect();
    let header = Header {
        spec: state.spec.clone(),
        epoch: state.epoch,
        seed: state.seed,
        optimizer_step: state.optimizer.step,
        has_moments: !state.optimizer.m.is_empty(),
        tensors,
    };
    let header_json = serde_json::to_vec(&header).map_err(|e| Error::Validation(e.to_string()))?;

    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header_json);
    for t in state.params.tensors() {
        push_f64s(&mut buf, t.data());
    }
    for rs in &state.running {
        push_f64s(&mut buf, &rs.mean);
        push_f64s(&mut buf, &rs.var);
    }
    if header.has_moments {
        for t in state.optimizer.m.iter().chain(&state.optimizer.v) {
            push_f64s(&mut buf, t.data());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(digest.as_slice());
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::CorruptCheckpoint("unexpected end of payload".into()));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn f64s(&mut self, out: &mut [f64]) -> Result<()> {
        let raw = self.take(out.len() * 8)?;
        for (v, chunk) in out.iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelState> {
    let corrupt = |msg: &str| Error::CorruptCheckpoint(msg.to_string());
    if bytes.len() < CHECKPOINT_MAGIC.len() + 12 + CHECKSUM_LEN {
        return Err(corrupt("file too short"));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(corrupt("checksum mismatch"));
    }
    let mut r = Reader {
        bytes: body,
        pos: 0,
    };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::CorruptCheckpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let header_len = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(r.take(header_len)?)
        .map_err(|e| Error::CorruptCheckpoint(format!("header: {e}")))?;

    let (mut state, _) = build_model(&header.spec, header.seed)
        .map_err(|e| Error::CorruptCheckpoint(format!("embedded spec: {e}")))?;
    {
        let names = state.params.names();
        let mut tensors = state.params.tensors_mut();
        if header.tensors.len() != tensors.len() {
            return Err(corrupt("tensor count does not match spec"));
        }
        for ((entry, name), t) in header.tensors.iter().zip(&names).zip(tensors.iter_mut()) {
            if &entry.name != name || entry.shape != t.shape() {
                return Err(Error::CorruptCheckpoint(format!(
                    "tensor {} {:?} does not match spec ({name} {:?})",
                    entry.name,
                    entry.shape,
                    t.shape()
                )));
            }
            r.f64s(t.data_mut())?;
        }
    }
    for rs in &mut state.running {
        r.f64s(&mut rs.mean)?;
        r.f64s(&mut rs.var)?;
    }
    if header.has_moments {
        let mut m: Vec<Tensor> = state
            .params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros_like(t))
            .collect();
        let mut v = m.clone();
        for t in m.iter_mut().chain(v.iter_mut()) {
            r.f64s(t.data_mut())?;
        }
        state.optimizer.m = m;
        state.optimizer.v = v;
    }
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes after payload"));
    }
    state.optimizer.step = header.optimizer_step;
    state.epoch = header.epoch;
    Ok(state)
}

pub fn save_checkpoint(state: &ModelState, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(state)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads a checkpoint and requires its embedded spec to equal `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelSpec) -> Result<ModelState> {
    let state = load_checkpoint(path)?;
    if &state.spec != expected {
        return Err(Error::SpecMismatch(format!(
            "checkpoint was built for input {} with filters {:?}, expected input {} with filters {:?}",
            state.spec.input_size,
            state.spec.block_filters,
            expected.input_size,
            expected.block_filters
        )));
    }
    Ok(state)
}
