//! `path,genre` CSV manifests.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::{io_err, TrainEvalError};

pub const DEFAULT_LABELS: [&str; 10] = [
    "bangla_hiphop",
    "bangla_metal",
    "bangla_rock",
    "deshattobodhok",
    "palligiti",
    "lalon_giti",
    "nazrul_sangeet",
    "rabindra_sangeet",
    "folk",
    "hamdnaat",
];

pub fn default_labels() -> Vec<String> {
    DEFAULT_LABELS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// As written in the manifest.
    pub path: String,
    /// Index into [`DatasetManifest::label_set`].
    pub genre: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub label_set: Vec<String>,
    /// Relative entry paths are resolved against this directory.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    /// Parse manifest text. Line numbers in errors are 1-based and count the header.
    pub fn parse(text: &str, label_set: Vec<String>, base_dir: impl Into<PathBuf>) -> Result<Self, TrainEvalError> {
        let mut seen_labels = HashSet::new();
        if label_set.is_empty() {
            return Err(TrainEvalError::InvalidConfig("label set is empty".into()));
        }
        for l in &label_set {
            if !seen_labels.insert(l.as_str()) {
                return Err(TrainEvalError::InvalidConfig(format!("duplicate label '{l}'")));
            }
        }

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .quoting(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        let mut paths = HashSet::new();
        let mut header_seen = false;
        for record in reader.records() {
            let record = record.map_err(|e| TrainEvalError::ParseError {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.iter().all(|f| f.trim().is_empty()) {
                continue;
            }
            if !header_seen {
                let fields: Vec<&str> = record.iter().map(str::trim).collect();
                if fields != ["path", "genre"] {
                    return Err(TrainEvalError::ParseError {
                        line,
                        message: format!("expected header 'path,genre', found '{}'", fields.join(",")),
                    });
                }
                header_seen = true;
                continue;
            }
            if record.len() != 2 {
                return Err(TrainEvalError::ParseError {
                    line,
                    message: format!(
                        "expected 2 fields, found {} (paths may not contain commas)",
                        record.len()
                    ),
                });
            }
            let path = record[0].trim().to_string();
            let genre = record[1].trim();
            if path.is_empty() {
                return Err(TrainEvalError::ParseError {
                    line,
                    message: "empty path".into(),
                });
            }
            let genre = label_set
                .iter()
                .position(|l| l == genre)
                .ok_or_else(|| TrainEvalError::UnknownGenre {
                    line,
                    genre: genre.to_string(),
                })?;
            if !paths.insert(path.clone()) {
                return Err(TrainEvalError::DuplicatePath { line, path });
            }
            entries.push(ManifestEntry { path, genre });
        }
        if entries.is_empty() {
            return Err(TrainEvalError::EmptyManifest);
        }
        Ok(Self {
            entries,
            label_set,
            base_dir: base_dir.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn genre_name(&self, idx: usize) -> &str {
        &self.label_set[idx]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,genre\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.path, self.label_set[e.genre]));
        }
        out
    }
}

pub fn load_manifest(path: impl AsRef<Path>, label_set: Vec<String>) -> Result<DatasetManifest, TrainEvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    DatasetManifest::parse(&text, label_set, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<DatasetManifest, TrainEvalError> {
        DatasetManifest::parse(text, default_labels(), "/data")
    }

    #[test]
    fn two_rows() {
        let m = parse("path,genre\na.wav,folk\nsub/b.wav,palligiti\n").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries[0].genre, 8);
        assert_eq!(m.resolve(&m.entries[1]), PathBuf::from("/data/sub/b.wav"));
        assert_eq!(parse(&m.to_csv()).unwrap(), m);
    }

    #[test]
    fn unknown_genre_reports_line() {
        match parse("path,genre\na.wav,folk\nb.wav,jazz\n") {
            Err(TrainEvalError::UnknownGenre { line: 3, genre }) => assert_eq!(genre, "jazz"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_and_header_only() {
        assert!(matches!(parse(""), Err(TrainEvalError::EmptyManifest)));
        assert!(matches!(parse("path,genre\n"), Err(TrainEvalError::EmptyManifest)));
    }

    #[test]
    fn duplicates_commas_and_bad_header() {
        assert!(matches!(
            parse("path,genre\na.wav,folk\na.wav,folk\n"),
            Err(TrainEvalError::DuplicatePath { line: 3, .. })
        ));
        assert!(matches!(
            parse("path,genre\nmy,song.wav,folk\n"),
            Err(TrainEvalError::ParseError { line: 2, .. })
        ));
        assert!(matches!(
            parse("file,label\na.wav,folk\n"),
            Err(TrainEvalError::ParseError { line: 1, .. })
        ));
    }
}
