//! Binary checkpoint: magic, manifest length, JSON manifest, raw payload.
//!
//! ```text
//! b"RHLMCKPT" | u64 LE manifest length | manifest JSON | payload
//! ```
//!
//! The manifest lists each tensor's group, name, shape, dtype and byte range
//! in the payload, plus the payload's SHA-256. Tensors are little-endian
//! floats in the trainer's storage precision.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmaState, OptimizerState, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{param_shapes, NetConfig, Params};
use crate::random::RngState;
use crate::tensor::{Scalar, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"RHLMCKPT";
const GROUPS: [&str; 4] = ["params", "ema", "adam_m", "adam_v"];

/// Complete training state.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub net_config: NetConfig,
    pub train_config: TrainConfig,
    pub step: usize,
    pub rng: RngState,
    pub params: Params<T>,
    pub ema: EmaState<T>,
    pub opt: OptimizerState<T>,
    /// Free-form provenance, e.g. the resolved experiment config.
    pub extra: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    group: String,
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: usize,
    nbytes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    step: usize,
    rng: RngState,
    ema_updates: u64,
    adam_step: u64,
    net_config: NetConfig,
    train_config: TrainConfig,
    extra: serde_json::Value,
    payload_bytes: usize,
    payload_sha256: String,
    tensors: Vec<TensorEntry>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn dtype_size(dtype: &str) -> Result<usize> {
    match dtype {
        "f32" => Ok(4),
        "f64" => Ok(8),
        other => Err(Error::Checkpoint(format!("unsupported dtype {other:?}"))),
    }
}

fn encode<T: Scalar>(t: &Tensor<T>, out: &mut Vec<u8>) {
    for &x in t.data() {
        match T::NAME {
            "f32" => out.extend_from_slice(&x.to_f32().expect("f32 value").to_le_bytes()),
            _ => out.extend_from_slice(&x.f64().to_le_bytes()),
        }
    }
}

fn decode<T: Scalar>(bytes: &[u8], dtype: &str) -> Vec<T> {
    match dtype {
        "f32" => bytes
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect(),
        _ => bytes
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect(),
    }
}

/// Writes to a temporary sibling and renames, so a crash never leaves a
/// half-written checkpoint under `path`.
pub fn save_checkpoint<T: Scalar>(ck: &Checkpoint<T>, path: &Path) -> Result<()> {
    let mut payload = Vec::new();
    let mut tensors = Vec::new();
    let groups = [&ck.params, &ck.ema.shadow, &ck.opt.m, &ck.opt.v];
    for (group, params) in GROUPS.iter().zip(groups) {
        for (name, t) in params.iter() {
            let offset = payload.len();
            encode(t, &mut payload);
            tensors.push(TensorEntry {
                group: group.to_string(),
                name: name.clone(),
                shape: t.shape().to_vec(),
                dtype: T::NAME.to_string(),
                offset,
                nbytes: payload.len() - offset,
            });
        }
    }
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        step: ck.step,
        rng: ck.rng,
        ema_updates: ck.ema.updates_applied,
        adam_step: ck.opt.step,
        net_config: ck.net_config.clone(),
        train_config: ck.train_config.clone(),
        extra: ck.extra.clone(),
        payload_bytes: payload.len(),
        payload_sha256: hex(&Sha256::digest(&payload)),
        tensors,
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| Error::json(path, e))?;
    let mut bytes = Vec::with_capacity(16 + json.len() + payload.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    bytes.extend_from_slice(&payload);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint, converting stored tensors to `T`.
///
/// Every structural check runs before any state is returned.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Checkpoint(format!("{}: {msg}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let json_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let json_end = usize::try_from(json_len)
        .ok()
        .and_then(|n| n.checked_add(16))
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| {
            bad(format!(
                "manifest length {json_len} exceeds file size {}",
                bytes.len()
            ))
        })?;
    let manifest: Manifest = serde_json::from_slice(&bytes[16..json_end])
        .map_err(|e| bad(format!("manifest is not valid: {e}")))?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "version {} (expected {CHECKPOINT_VERSION})",
            manifest.version
        )));
    }
    let payload = &bytes[json_end..];
    if payload.len() != manifest.payload_bytes {
        return Err(bad(format!(
            "payload has {} bytes, manifest says {}",
            payload.len(),
            manifest.payload_bytes
        )));
    }
    if hex(&Sha256::digest(payload)) != manifest.payload_sha256 {
        return Err(bad("payload checksum mismatch".into()));
    }

    let mut groups: Vec<Params<T>> = (0..GROUPS.len()).map(|_| Params::default()).collect();
    for entry in &manifest.tensors {
        let gi = GROUPS
            .iter()
            .position(|g| *g == entry.group)
            .ok_or_else(|| bad(format!("unknown tensor group {:?}", entry.group)))?;
        let n: usize = entry.shape.iter().product();
        let want = n * dtype_size(&entry.dtype)?;
        let end = entry
            .offset
            .checked_add(entry.nbytes)
            .filter(|&e| e <= payload.len());
        if entry.nbytes != want || end.is_none() {
            return Err(bad(format!(
                "tensor {}/{} has an invalid byte range",
                entry.group, entry.name
            )));
        }
        let data = decode(
            &payload[entry.offset..entry.offset + entry.nbytes],
            &entry.dtype,
        );
        groups[gi].insert(&entry.name, Tensor::new(entry.shape.clone(), data)?);
    }
    let expected = param_shapes(&manifest.net_config);
    for (g, params) in GROUPS.iter().zip(&groups) {
        params
            .check_layout(&expected)
            .map_err(|e| bad(format!("group {g}: {e}")))?;
    }
    let mut it = groups.into_iter();
    let mut next = || it.next().expect("four groups");
    let (params, shadow, m, v) = (next(), next(), next(), next());
    Ok(Checkpoint {
        net_config: manifest.net_config,
        train_config: manifest.train_config,
        step: manifest.step,
        rng: manifest.rng,
        params,
        ema: EmaState {
            shadow,
            updates_applied: manifest.ema_updates,
        },
        opt: OptimizerState {
            m,
            v,
            step: manifest.adam_step,
        },
        extra: manifest.extra,
    })
}

impl<T> Checkpoint<T> {
    /// Errors unless the stored network matches `expected`.
    pub fn check_net_config(&self, expected: &NetConfig) -> Result<()> {
        if &self.net_config != expected {
            return Err(Error::Checkpoint(format!(
                "checkpoint network {:?} does not match configured {:?}",
                self.net_config, expected
            )));
        }
        Ok(())
    }
}
