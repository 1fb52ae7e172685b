//! Checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes   "FSEGCKPT"
//! version      u32       CHECKPOINT_VERSION
//! header_len   u64       byte length of the JSON header
//! header       JSON      see `Header`
//! payload      f64 LE    tensors back to back, in header order
//! ```
//!
//! Tensor names are `param/<name>` for model weights and `adam.m/<name>`,
//! `adam.v/<name>` for optimizer moments. Offsets and counts in the header
//! are in `f64` elements from the start of the payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::AdamHyper;
use super::{AdamW, ParamStore, ToyDecoder, ToyModelConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FSEGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_config: ToyModelConfig,
    pub params: ParamStore,
    pub optimizer: Option<AdamW>,
    /// Last completed epoch.
    pub epoch: usize,
    pub seed: u64,
    /// Free-form run configuration echo.
    pub run_config: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    count: usize,
}

#[derive(Serialize, Deserialize)]
struct OptimizerHeader {
    step: u64,
    hyper: AdamHyper,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model_config: ToyModelConfig,
    epoch: usize,
    seed: u64,
    run_config: serde_json::Value,
    optimizer: Option<OptimizerHeader>,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn from_model(model: &ToyDecoder, optimizer: Option<&AdamW>, epoch: usize, seed: u64, run_config: serde_json::Value) -> Self {
        Self {
            model_config: model.config().clone(),
            params: model.params().clone(),
            optimizer: optimizer.cloned(),
            epoch,
            seed,
            run_config,
        }
    }

    pub fn model(&self) -> Result<ToyDecoder> {
        ToyDecoder::from_params(self.model_config.clone(), self.params.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut tensors = Vec::new();
        let mut payload: Vec<f64> = Vec::with_capacity(self.params.num_values() * 3);
        let mut add = |prefix: &str, store: &ParamStore| {
            for (name, shape, data) in store.iter() {
                tensors.push(TensorEntry {
                    name: format!("{prefix}/{name}"),
                    shape: shape.to_vec(),
                    offset: payload.len(),
                    count: data.len(),
                });
                payload.extend_from_slice(data);
            }
        };
        add("param", &self.params);
        if let Some(opt) = &self.optimizer {
            add("adam.m", &opt.m);
            add("adam.v", &opt.v);
        }
        let header = Header {
            model_config: self.model_config.clone(),
            epoch: self.epoch,
            seed: self.seed,
            run_config: self.run_config.clone(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerHeader {
                step: o.step,
                hyper: o.hyper,
            }),
            tensors,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(20 + json.len() + payload.len() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for v in payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes.get(20..20 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body)?;
        let payload = &bytes[20 + hlen..];
        if !payload.len().is_multiple_of(8) {
            return Err(bad("payload is not a whole number of f64 values"));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        header.model_config.validate()?;

        let reference = ToyDecoder::new(header.model_config.clone(), 0)?;
        let mut params = reference.params().zeros_like();
        let mut m = params.zeros_like();
        let mut v = params.zeros_like();
        for t in &header.tensors {
            let data = values
                .get(t.offset..t.offset + t.count)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {} out of bounds", t.name)))?
                .to_vec();
            let (prefix, name) = t
                .name
                .split_once('/')
                .ok_or_else(|| Error::Checkpoint(format!("bad tensor name {}", t.name)))?;
            let store = match prefix {
                "param" => &mut params,
                "adam.m" => &mut m,
                "adam.v" => &mut v,
                other => return Err(Error::Checkpoint(format!("unknown tensor group {other}"))),
            };
            store.set(name, &t.shape, data)?;
        }
        let n_params = params.len();
        let seen = |p: &str| header.tensors.iter().filter(|t| t.name.starts_with(p)).count();
        if seen("param/") != n_params {
            return Err(bad("missing model tensors"));
        }
        let optimizer = match header.optimizer {
            None => None,
            Some(o) => {
                if seen("adam.m/") != n_params || seen("adam.v/") != n_params {
                    return Err(bad("missing optimizer tensors"));
                }
                Some(AdamW::from_state(&params, o.hyper, o.step, m, v)?)
            }
        };
        Ok(Self {
            model_config: header.model_config,
            params,
            optimizer,
            epoch: header.epoch,
            seed: header.seed,
            run_config: header.run_config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}
