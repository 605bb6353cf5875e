//! Model checkpoint container.
//!
//! ```text
//! offset   size     field
//! 0        4        magic "LRCN"
//! 4        4        format version, u32 LE (currently 1)
//! 8        4        scalar width in bytes, u32 LE (4 = f32, 8 = f64)
//! 12       4        metadata length M, u32 LE
//! 16       M        UTF-8 JSON metadata: {"model": .., "train": .., "extra": ..}
//! 16+M     8        parameter count P, u64 LE
//! 24+M     P*width  parameters, little-endian, in `Layout` order
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{LrcnConfig, LrcnParams};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LRCN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: LrcnConfig,
    pub train: Option<TrainConfig>,
    /// Caller-defined payload (normalisation stats, feature set, ...).
    #[serde(default)]
    pub extra: serde_json::Value,
}

pub fn encode_checkpoint<T: Real>(params: &LrcnParams<T>, train: Option<&TrainConfig>, extra: serde_json::Value) -> Vec<u8> {
    let meta = CheckpointMeta {
        model: params.config().clone(),
        train: train.cloned(),
        extra,
    };
    let json = serde_json::to_vec(&meta).expect("metadata serialises");
    let mut out = Vec::with_capacity(24 + json.len() + params.len() * T::BYTES);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(T::BYTES as u32).to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for &v in params.as_slice() {
        v.write_le(&mut out);
    }
    out
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<(LrcnParams<T>, CheckpointMeta)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let u32_at = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| bad("truncated header"))
    };
    if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(bad("not an LRCN checkpoint"));
    }
    let version = u32_at(4)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let width = u32_at(8)? as usize;
    if width != T::BYTES {
        return Err(Error::Checkpoint(format!(
            "checkpoint stores {width}-byte scalars, expected {}",
            T::BYTES
        )));
    }
    let meta_len = u32_at(12)? as usize;
    let meta_bytes = bytes.get(16..16 + meta_len).ok_or_else(|| bad("truncated metadata"))?;
    let meta: CheckpointMeta =
        serde_json::from_slice(meta_bytes).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
    let at = 16 + meta_len;
    let count = bytes
        .get(at..at + 8)
        .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
        .ok_or_else(|| bad("truncated parameter count"))? as usize;
    let body = &bytes[at + 8..];
    if body.len() != count * width {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            count * width,
            body.len()
        )));
    }
    let data = body.chunks_exact(width).map(T::read_le).collect();
    let params = LrcnParams::from_vec(meta.model.clone(), data)?;
    Ok((params, meta))
}

pub fn save_checkpoint<T: Real>(
    path: impl AsRef<Path>,
    params: &LrcnParams<T>,
    train: Option<&TrainConfig>,
    extra: serde_json::Value,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(params, train, extra)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<(LrcnParams<T>, CheckpointMeta)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
