//! Seeded train/val/test split, stratified by genre and grouped by recording.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::manifest::DatasetManifest;
use super::TrainEvalError;

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.15, 0.15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{other}' (expected train|val|test)")),
        }
    }
}

/// Manifest entry indices (recordings) per split, each list ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub fractions: [f64; 3],
}

impl SplitAssignment {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Which split a manifest entry belongs to.
    pub fn of(&self, entry: usize) -> Option<Split> {
        Split::ALL
            .into_iter()
            .find(|&s| self.get(s).binary_search(&entry).is_ok())
    }

    /// SHA-256 over the three index lists, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for s in Split::ALL {
            h.update(s.as_str().as_bytes());
            for &i in self.get(s) {
                h.update((i as u64).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `path,split` rows in manifest order.
    pub fn to_csv(&self, manifest: &DatasetManifest) -> String {
        let mut out = String::from("path,split\n");
        for (i, e) in manifest.entries.iter().enumerate() {
            if let Some(s) = self.of(i) {
                out.push_str(&format!("{},{}\n", e.path, s.as_str()));
            }
        }
        out
    }

    /// Inverse of [`SplitAssignment::to_csv`].
    pub fn from_csv(text: &str, manifest: &DatasetManifest, seed: u64) -> Result<Self, TrainEvalError> {
        let mut out = Self {
            train: vec![],
            val: vec![],
            test: vec![],
            seed,
            fractions: DEFAULT_FRACTIONS,
        };
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| TrainEvalError::ParseError { line: n + 1, message };
            let (path, split) = line
                .rsplit_once(',')
                .ok_or_else(|| bad("expected 'path,split'".into()))?;
            let split: Split = split.trim().parse().map_err(bad)?;
            let idx = manifest
                .entries
                .iter()
                .position(|e| e.path == path)
                .ok_or_else(|| TrainEvalError::ParseError {
                    line: n + 1,
                    message: format!("'{path}' is not in the manifest"),
                })?;
            match split {
                Split::Train => out.train.push(idx),
                Split::Val => out.val.push(idx),
                Split::Test => out.test.push(idx),
            }
        }
        out.train.sort_unstable();
        out.val.sort_unstable();
        out.test.sort_unstable();
        Ok(out)
    }
}

/// Split sizes for `n` items by the largest-remainder rule. Equal remainders
/// are resolved by rotating through the tied splits with `rotation`, so that
/// ties spread evenly across genres.
pub fn largest_remainder(n: usize, fractions: &[f64; 3], rotation: usize) -> [usize; 3] {
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, r) in counts.iter_mut().zip(&raw) {
        *c = (r + 1e-9).floor() as usize;
    }
    let mut left = n - counts.iter().sum::<usize>();
    let mut rem: Vec<f64> = raw.iter().zip(&counts).map(|(r, &c)| r - c as f64).collect();
    let mut turn = rotation;
    while left > 0 {
        let best = rem.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..3).filter(|&i| rem[i] > best - 1e-9).collect();
        let pick = tied[turn % tied.len()];
        counts[pick] += 1;
        rem[pick] = f64::NEG_INFINITY;
        left -= 1;
        turn += 1;
    }
    counts
}

pub fn stratified_split(
    manifest: &DatasetManifest,
    seed: u64,
    fractions: [f64; 3],
) -> Result<SplitAssignment, TrainEvalError> {
    if fractions.iter().any(|&f| !(f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(TrainEvalError::InvalidConfig(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SplitAssignment {
        train: vec![],
        val: vec![],
        test: vec![],
        seed,
        fractions,
    };
    for (g, name) in manifest.label_set.iter().enumerate() {
        let mut members: Vec<usize> = (0..manifest.len())
            .filter(|&i| manifest.entries[i].genre == g)
            .collect();
        if members.len() < 3 {
            return Err(TrainEvalError::GenreTooSmall {
                genre: name.clone(),
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let [n_train, n_val, _] = largest_remainder(members.len(), &fractions, g);
        out.train.extend_from_slice(&members[..n_train]);
        out.val.extend_from_slice(&members[n_train..n_train + n_val]);
        out.test.extend_from_slice(&members[n_train + n_val..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}
