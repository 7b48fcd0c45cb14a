//! `BMGC1` model container.
//!
//! ```text
//! "BMGC1\n"
//! u32  version
//! u32  metadata length, then UTF-8 JSON metadata
//! u32  tensor count
//!      per tensor: u32 name length, name, u32 rank, u32 dims[rank], u64 payload offset
//! f32  payloads, row-major, little-endian
//! ```
//!
//! Values are held as `f64` in memory and stored as `f32`, so a save/load
//! cycle rounds once and every later cycle is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::batchnorm::BatchNormParams;
use super::lstm::LstmCellParams;
use super::model::{Architecture, DenseParams, LayerParams, ModelParams};
use super::tensor::Tensor2;
use super::NnError;
use crate::features::NormStats;

pub const MAGIC: &[u8; 6] = b"BMGC1\n";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelMeta {
    input_dim: usize,
    hidden: usize,
    layers: usize,
    dense_hidden: usize,
    classes: usize,
    head: String,
    bidirectional: bool,
    genres: Vec<String>,
    normalizer: String,
    config: BTreeMap<String, String>,
}

/// Everything a trained classifier needs at inference time.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub params: ModelParams,
    pub norm: NormStats,
    pub genres: Vec<String>,
    /// Resolved run configuration, `key -> value`.
    pub config: BTreeMap<String, String>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).ok_or(NnError::TruncatedFile)?;
        if end > self.bytes.len() {
            return Err(NnError::TruncatedFile);
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn stored_tensors(model: &SavedModel) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    let mut out: Vec<(String, Vec<usize>, Vec<f64>)> = model
        .params
        .named_tensors()
        .into_iter()
        .map(|(name, t)| (name, vec![t.rows(), t.cols()], t.data().to_vec()))
        .collect();
    out.push(("norm.mu".into(), vec![model.norm.dim()], model.norm.mu.clone()));
    out.push(("norm.sigma".into(), vec![model.norm.dim()], model.norm.sigma.clone()));
    out
}

pub fn encode_model(model: &SavedModel) -> Result<Vec<u8>, NnError> {
    let arch = &model.params.arch;
    if model.genres.len() != arch.classes {
        return Err(NnError::ShapeChainBroken(format!(
            "{} genre names for {} classes",
            model.genres.len(),
            arch.classes
        )));
    }
    let meta = ModelMeta {
        input_dim: arch.input_dim,
        hidden: arch.hidden,
        layers: arch.layers,
        dense_hidden: arch.dense_hidden,
        classes: arch.classes,
        head: arch.head.as_str().into(),
        bidirectional: arch.bidirectional,
        genres: model.genres.clone(),
        normalizer: "embedded:norm.mu,norm.sigma".into(),
        config: model.config.clone(),
    };
    let json = serde_json::to_vec(&meta).map_err(|e| NnError::Metadata(e.to_string()))?;
    let tensors = stored_tensors(model);

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for (name, dims, data) in &tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&offset.to_le_bytes());
        offset += data.len() as u64 * 4;
    }
    for (_, _, data) in &tensors {
        for &v in data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel, NnError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(NnError::BadMagic);
    }
    let mut rd = Reader { bytes, pos: MAGIC.len() };
    let version = rd.u32()?;
    if version != VERSION {
        return Err(NnError::VersionMismatch { found: version, expected: VERSION });
    }
    let meta_len = rd.u32()? as usize;
    let meta: ModelMeta =
        serde_json::from_slice(rd.take(meta_len)?).map_err(|e| NnError::Metadata(e.to_string()))?;

    let count = rd.u32()? as usize;
    let mut directory = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = rd.u32()? as usize;
        let name = String::from_utf8(rd.take(name_len)?.to_vec())
            .map_err(|e| NnError::Metadata(e.to_string()))?;
        let rank = rd.u32()? as usize;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(rd.u32()? as usize);
        }
        let offset = rd.u64()? as usize;
        directory.push((name, dims, offset));
    }
    let payload = &bytes[rd.pos..];
    let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    for (name, dims, offset) in directory {
        let n: usize = dims.iter().product();
        let end = offset
            .checked_add(n * 4)
            .ok_or(NnError::TruncatedFile)?;
        if end > payload.len() {
            return Err(NnError::TruncatedFile);
        }
        let data = payload[offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        tensors.insert(name, (dims, data));
    }

    let arch = Architecture {
        input_dim: meta.input_dim,
        hidden: meta.hidden,
        layers: meta.layers,
        dense_hidden: meta.dense_hidden,
        classes: meta.classes,
        head: meta.head.parse().map_err(NnError::Metadata)?,
        bidirectional: meta.bidirectional,
    };
    arch.validate()
        .map_err(|e| NnError::ShapeChainBroken(e.to_string()))?;
    if meta.genres.len() != arch.classes {
        return Err(NnError::ShapeChainBroken(format!(
            "{} genre names for {} classes",
            meta.genres.len(),
            arch.classes
        )));
    }

    let mut take = |name: String, rows: usize, cols: usize| -> Result<Tensor2, NnError> {
        let (dims, data) = tensors
            .remove(&name)
            .ok_or_else(|| NnError::ShapeChainBroken(format!("missing tensor {name}")))?;
        if dims != [rows, cols] {
            return Err(NnError::ShapeChainBroken(format!(
                "{name} has dims {dims:?}, expected [{rows}, {cols}]"
            )));
        }
        Ok(Tensor2::from_vec(rows, cols, data))
    };

    let h = arch.hidden;
    let width = arch.layer_output();
    let mut layers = Vec::with_capacity(arch.layers);
    for l in 0..arch.layers {
        let input = if l == 0 { arch.input_dim } else { width };
        let cell = |dir: &str, take: &mut dyn FnMut(String, usize, usize) -> Result<Tensor2, NnError>| {
            LstmCellParams::from_tensors(
                take(format!("layer{l}.{dir}.w"), 4 * h, h + input)?,
                take(format!("layer{l}.{dir}.b"), 1, 4 * h)?,
            )
        };
        let fwd = cell("fwd", &mut take)?;
        let bwd = if arch.bidirectional {
            Some(cell("bwd", &mut take)?)
        } else {
            None
        };
        let bn = BatchNormParams {
            gamma: take(format!("layer{l}.bn.gamma"), 1, width)?,
            beta: take(format!("layer{l}.bn.beta"), 1, width)?,
            running_mean: take(format!("layer{l}.bn.running_mean"), 1, width)?,
            running_var: take(format!("layer{l}.bn.running_var"), 1, width)?,
        };
        if bn.running_var.data().iter().any(|&v| !(v > 0.0)) {
            return Err(NnError::ShapeChainBroken(format!(
                "layer{l} running variance must be positive"
            )));
        }
        layers.push(LayerParams { fwd, bwd, bn });
    }
    let dense_hidden = DenseParams {
        w: take("dense_hidden.w".into(), arch.dense_hidden, width)?,
        b: take("dense_hidden.b".into(), 1, arch.dense_hidden)?,
    };
    let dense_out = DenseParams {
        w: take("dense_out.w".into(), arch.classes, arch.dense_hidden)?,
        b: take("dense_out.b".into(), 1, arch.classes)?,
    };
    let mut vector = |name: &str| -> Result<Vec<f64>, NnError> {
        let (dims, data) = tensors
            .remove(name)
            .ok_or_else(|| NnError::ShapeChainBroken(format!("missing tensor {name}")))?;
        if dims != [arch.input_dim] {
            return Err(NnError::ShapeChainBroken(format!(
                "{name} has dims {dims:?}, expected [{}]",
                arch.input_dim
            )));
        }
        Ok(data)
    };
    let norm = NormStats {
        mu: vector("norm.mu")?,
        sigma: vector("norm.sigma")?,
    };

    Ok(SavedModel {
        params: ModelParams {
            arch,
            layers,
            dense_hidden,
            dense_out,
        },
        norm,
        genres: meta.genres,
        config: meta.config,
    })
}

pub fn save_model(model: &SavedModel, path: impl AsRef<Path>) -> Result<(), NnError> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)?).map_err(|source| NnError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel, NnError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| NnError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_model(&bytes)
}
