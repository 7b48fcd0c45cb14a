//! `BMFX1` feature container.
//!
//! Layout: magic `"BMFX1\n"`, a `u32` little-endian byte length followed by
//! that many bytes of UTF-8 JSON metadata (`T`, `d`, `label`, `source`,
//! `created`, plus optional extras), then `T*d` little-endian `f32` values in
//! row-major order. Normalizer statistics use the same container with two
//! rows named by the `tensors` key: `mu` then `sigma`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureSequence, NormStats};
use crate::nn::Tensor2;

pub const MAGIC: &[u8; 6] = b"BMFX1\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    #[serde(rename = "T")]
    pub t: usize,
    pub d: usize,
    pub label: Option<String>,
    pub source: String,
    pub created: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<usize>,
    /// Segment means of the aux descriptors, consumed by the baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensors: Option<Vec<String>>,
}

pub fn encode(meta: &FeatureMeta, data: &Tensor2) -> Result<Vec<u8>, FeatureError> {
    if meta.t != data.rows() || meta.d != data.cols() {
        return Err(FeatureError::ShapeMismatch(format!(
            "metadata says {}x{}, tensor is {}x{}",
            meta.t,
            meta.d,
            data.rows(),
            data.cols()
        )));
    }
    let json = serde_json::to_vec(meta).map_err(|e| FeatureError::Metadata(e.to_string()))?;
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + data.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for &v in data.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(FeatureMeta, Tensor2), FeatureError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(FeatureError::BadMagic);
    }
    let mut pos = MAGIC.len();
    if bytes.len() < pos + 4 {
        return Err(FeatureError::Truncated("missing metadata length".into()));
    }
    let meta_len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
    pos += 4;
    if bytes.len() < pos + meta_len {
        return Err(FeatureError::Truncated("metadata block cut short".into()));
    }
    let meta: FeatureMeta = serde_json::from_slice(&bytes[pos..pos + meta_len])
        .map_err(|e| FeatureError::Metadata(e.to_string()))?;
    pos += meta_len;
    let want = meta
        .t
        .checked_mul(meta.d)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FeatureError::Metadata("T*d overflows".into()))?;
    let payload = &bytes[pos..];
    if payload.len() < want {
        return Err(FeatureError::Truncated(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            want
        )));
    }
    if payload.len() > want {
        return Err(FeatureError::Metadata(format!(
            "{} trailing bytes after payload",
            payload.len() - want
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((meta.clone(), Tensor2::from_vec(meta.t, meta.d, data)))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FeatureError> {
    let io = |source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, FeatureError> {
    std::fs::read(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write one segment's features.
pub fn write_features(
    path: impl AsRef<Path>,
    seq: &FeatureSequence,
    segment: Option<usize>,
    aux_mean: Option<Vec<f64>>,
    created: &str,
) -> Result<(), FeatureError> {
    let meta = FeatureMeta {
        t: seq.frames(),
        d: seq.dim(),
        label: seq.label.clone(),
        source: seq.source.clone(),
        created: created.to_string(),
        segment,
        aux_mean,
        tensors: None,
    };
    write_bytes(path.as_ref(), &encode(&meta, &seq.x)?)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<(FeatureSequence, FeatureMeta), FeatureError> {
    let (meta, x) = decode(&read_bytes(path.as_ref())?)?;
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::Metadata("non-finite feature values".into()));
    }
    Ok((FeatureSequence::new(x, meta.label.clone(), meta.source.clone()), meta))
}

pub fn write_norm_stats(
    path: impl AsRef<Path>,
    stats: &NormStats,
    created: &str,
) -> Result<(), FeatureError> {
    let d = stats.dim();
    let data = Tensor2::from_vec(2, d, [stats.mu.as_slice(), stats.sigma.as_slice()].concat());
    let meta = FeatureMeta {
        t: 2,
        d,
        label: None,
        source: "normalizer".into(),
        created: created.to_string(),
        segment: None,
        aux_mean: None,
        tensors: Some(vec!["mu".into(), "sigma".into()]),
    };
    write_bytes(path.as_ref(), &encode(&meta, &data)?)
}

pub fn read_norm_stats(path: impl AsRef<Path>) -> Result<NormStats, FeatureError> {
    let (meta, data) = decode(&read_bytes(path.as_ref())?)?;
    if meta.t != 2 || meta.tensors.as_deref() != Some(&["mu".to_string(), "sigma".to_string()][..]) {
        return Err(FeatureError::Metadata("not a normalizer container".into()));
    }
    Ok(NormStats {
        mu: data.row(0).to_vec(),
        sigma: data.row(1).to_vec(),
    })
}
