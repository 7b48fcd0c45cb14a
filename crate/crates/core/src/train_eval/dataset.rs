//! Extracted-feature directories: `index.csv` plus one `BMFX1` file per segment.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use super::manifest::DatasetManifest;
use super::split::{Split, SplitAssignment};
use super::{io_err, TrainEvalError};
use crate::features::{apply_normalizer, read_features, FeatureSequence, NormStats};
use crate::nn::Tensor2;

pub const INDEX_FILE: &str = "index.csv";

/// One row of `index.csv`: `file,source,genre,segment`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureIndexRow {
    /// Relative to the features directory.
    pub file: String,
    /// Manifest path of the recording.
    pub source: String,
    pub genre: String,
    pub segment: usize,
}

impl FeatureIndexRow {
    pub const HEADER: &'static str = "file,source,genre,segment";

    pub fn to_line(&self) -> String {
        format!("{},{},{},{}", self.file, self.source, self.genre, self.segment)
    }
}

pub fn parse_index(text: &str) -> Result<Vec<FeatureIndexRow>, TrainEvalError> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| TrainEvalError::ParseError { line: n + 1, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        rows.push(FeatureIndexRow {
            file: fields[0].to_string(),
            source: fields[1].to_string(),
            genre: fields[2].to_string(),
            segment: fields[3]
                .trim()
                .parse()
                .map_err(|e| bad(format!("segment: {e}")))?,
        });
    }
    Ok(rows)
}

/// A loaded segment with its place in the manifest.
#[derive(Debug, Clone)]
pub struct SegmentRecord {
    pub seq: FeatureSequence,
    pub aux_mean: Vec<f64>,
    pub genre: usize,
    /// Manifest entry index of the source recording.
    pub entry: usize,
    pub segment: usize,
}

/// A normalized sequence and its class index, ready for the network.
#[derive(Debug, Clone)]
pub struct Example {
    pub x: Tensor2,
    pub label: usize,
}

/// Load every indexed segment whose source is in `manifest`, in index order.
pub fn load_feature_dir(dir: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<Vec<SegmentRecord>, TrainEvalError> {
    let dir = dir.as_ref();
    let index_path = dir.join(INDEX_FILE);
    let text = std::fs::read_to_string(&index_path).map_err(io_err(&index_path))?;
    let rows = parse_index(&text)?;
    let by_path: HashMap<&str, usize> = manifest
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.path.as_str(), i))
        .collect();

    let mut wanted = Vec::new();
    for row in &rows {
        let Some(&entry) = by_path.get(row.source.as_str()) else {
            continue;
        };
        let genre = manifest.entries[entry].genre;
        if manifest.label_set[genre] != row.genre {
            return Err(TrainEvalError::LabelMismatch(format!(
                "{} is '{}' in the index but '{}' in the manifest",
                row.source, row.genre, manifest.label_set[genre]
            )));
        }
        wanted.push((row, entry, genre));
    }
    wanted
        .par_iter()
        .map(|(row, entry, genre)| {
            let (seq, meta) = read_features(dir.join(&row.file))?;
            Ok(SegmentRecord {
                seq,
                aux_mean: meta.aux_mean.unwrap_or_default(),
                genre: *genre,
                entry: *entry,
                segment: row.segment,
            })
        })
        .collect()
}

/// Records belonging to one split, in load order.
pub fn select<'a>(records: &'a [SegmentRecord], split: &SplitAssignment, which: Split) -> Vec<&'a SegmentRecord> {
    let members = split.get(which);
    records
        .iter()
        .filter(|r| members.binary_search(&r.entry).is_ok())
        .collect()
}

pub fn to_examples(records: &[&SegmentRecord], stats: &NormStats) -> Result<Vec<Example>, TrainEvalError> {
    records
        .iter()
        .map(|r| {
            Ok(Example {
                x: apply_normalizer(&r.seq, stats)?.x,
                label: r.genre,
            })
        })
        .collect()
}
