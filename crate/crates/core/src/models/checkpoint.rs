//! Checkpoint container.
//!
//! ```text
//! magic        8 bytes  "EMOCKPT1"
//! header_len   u64 little-endian
//! header       UTF-8 JSON, header_len bytes
//! payload      every tensor's values back to back, little-endian,
//!              4 bytes each for dtype "f32", 8 bytes for "f64"
//! ```
//!
//! The header holds `version`, `dtype`, the model `config`, the training
//! `iteration` and `seed`, a free-form `extra` object, and for each tensor its
//! `name`, `shape` and element `offset` into the payload. Model weights are
//! named `model.<layer>.<param>` (e.g. `model.conv1.weight`, with conv weights
//! stored as `[out, in * kd * kh * kw]`); optimizer state uses other prefixes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::Parameterized;
use crate::tensor::{Scalar, Tensor};

const MAGIC: &[u8; 8] = b"EMOCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const MODEL_PREFIX: &str = "model.";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    dtype: String,
    config: ModelConfig,
    iteration: u64,
    seed: u64,
    #[serde(default)]
    extra: serde_json::Value,
    tensors: Vec<Entry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

/// Weights and training state. Values are held as `f64` in memory, which is
/// lossless for both stored precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub dtype: String,
    pub config: ModelConfig,
    pub iteration: u64,
    pub seed: u64,
    pub extra: serde_json::Value,
    pub tensors: BTreeMap<String, Tensor<f64>>,
}

impl Checkpoint {
    pub fn capture<T: Scalar>(
        net: &mut impl Parameterized<T>,
        config: &ModelConfig,
        iteration: u64,
        seed: u64,
    ) -> Self {
        let mut tensors = BTreeMap::new();
        net.visit_params("", &mut |name, p| {
            tensors.insert(format!("{MODEL_PREFIX}{name}"), p.value.cast());
        });
        Checkpoint {
            dtype: T::DTYPE.to_string(),
            config: config.clone(),
            iteration,
            seed,
            extra: serde_json::Value::Null,
            tensors,
        }
    }

    /// Copies stored weights into `net`; every parameter must be present with
    /// the same shape.
    pub fn restore<T: Scalar>(&self, net: &mut impl Parameterized<T>) -> Result<()> {
        let mut err = None;
        net.visit_params("", &mut |name, p| {
            if err.is_some() {
                return;
            }
            match self.tensors.get(&format!("{MODEL_PREFIX}{name}")) {
                Some(t) if t.shape() == p.value.shape() => p.value = t.cast(),
                Some(t) => {
                    err = Some(Error::Checkpoint(format!(
                        "{name}: stored shape {:?}, model expects {:?}",
                        t.shape(),
                        p.value.shape()
                    )))
                }
                None => err = Some(Error::Checkpoint(format!("missing weight {name}"))),
            }
        });
        err.map_or(Ok(()), Err)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let width = match self.dtype.as_str() {
            "f32" => 4,
            "f64" => 8,
            other => return Err(Error::Checkpoint(format!("unsupported dtype {other}"))),
        };
        let mut entries = Vec::new();
        let mut offset = 0;
        for (name, t) in &self.tensors {
            entries.push(Entry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.len();
        }
        let header = serde_json::to_vec(&Header {
            version: CHECKPOINT_VERSION,
            dtype: self.dtype.clone(),
            config: self.config.clone(),
            iteration: self.iteration,
            seed: self.seed,
            extra: self.extra.clone(),
            tensors: entries,
        })?;
        let mut out = Vec::with_capacity(16 + header.len() + offset * width);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.tensors.values() {
            for &v in t.data() {
                if width == 4 {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                } else {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body)
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                header.version
            )));
        }
        let width = match header.dtype.as_str() {
            "f32" => 4,
            "f64" => 8,
            _ => return Err(bad("unsupported dtype")),
        };
        let payload = &bytes[16 + hlen..];
        let mut tensors = BTreeMap::new();
        for e in header.tensors {
            let n: usize = e.shape.iter().product();
            let raw = payload
                .get(e.offset * width..(e.offset + n) * width)
                .ok_or_else(|| bad("truncated payload"))?;
            let data: Vec<f64> = if width == 4 {
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect()
            } else {
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            };
            tensors.insert(e.name, Tensor::from_vec(&e.shape, data)?);
        }
        Ok(Checkpoint {
            dtype: header.dtype,
            config: header.config,
            iteration: header.iteration,
            seed: header.seed,
            extra: header.extra,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
