//! `key = value` run configuration shared by every subcommand.

use std::collections::BTreeMap;
use std::path::Path;

use crate::baselines::CompareConfig;
use crate::features::FeatureConfig;
use crate::nn::{AdamConfig, Architecture, Head};
use crate::train_eval::{default_labels, TrainConfig, DEFAULT_FRACTIONS};

pub const RESOLVED_FILE: &str = "config.resolved";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub delta_width: usize,
    pub segment_seconds: f64,
    pub hidden: usize,
    pub layers: usize,
    pub dense_hidden: usize,
    pub head: Head,
    pub bidirectional: bool,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub deterministic: bool,
    pub fractions: [f64; 3],
    pub labels: Vec<String>,
    pub knn_k: usize,
    pub logreg_epochs: usize,
    pub logreg_lr: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let f = FeatureConfig::default();
        let t = TrainConfig::default();
        let c = CompareConfig::default();
        Self {
            sample_rate: f.sample_rate,
            frame_len: f.frame_len,
            hop: f.hop,
            n_mels: f.n_mels,
            n_mfcc: f.n_mfcc,
            fmin: f.fmin,
            fmax: f.fmax,
            delta_width: f.delta_width,
            segment_seconds: crate::audio_io::SEGMENT_SECONDS,
            hidden: t.arch.hidden,
            layers: t.arch.layers,
            dense_hidden: t.arch.dense_hidden,
            head: t.arch.head,
            bidirectional: t.arch.bidirectional,
            lr: t.adam.lr,
            batch: t.batch_size,
            epochs: t.max_epochs,
            patience: t.patience,
            clip_norm: t.clip_norm,
            seed: t.seed,
            deterministic: false,
            fractions: DEFAULT_FRACTIONS,
            labels: default_labels(),
            knn_k: c.k,
            logreg_epochs: c.logreg_epochs,
            logreg_lr: c.logreg_lr,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("{key}: cannot parse '{value}': {e}"))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "sample_rate" => self.sample_rate = num(key, v)?,
            "frame_len" => self.frame_len = num(key, v)?,
            "hop" => self.hop = num(key, v)?,
            "n_mels" => self.n_mels = num(key, v)?,
            "n_mfcc" => self.n_mfcc = num(key, v)?,
            "fmin" => self.fmin = num(key, v)?,
            "fmax" => self.fmax = num(key, v)?,
            "delta_width" => self.delta_width = num(key, v)?,
            "segment_seconds" => self.segment_seconds = num(key, v)?,
            "hidden" => self.hidden = num(key, v)?,
            "layers" => self.layers = num(key, v)?,
            "dense_hidden" => self.dense_hidden = num(key, v)?,
            "head" => self.head = v.parse()?,
            "bidirectional" => self.bidirectional = num(key, v)?,
            "lr" => self.lr = num(key, v)?,
            "batch" => self.batch = num(key, v)?,
            "epochs" => self.epochs = num(key, v)?,
            "patience" => self.patience = num(key, v)?,
            "clip_norm" => self.clip_norm = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "deterministic" => self.deterministic = num(key, v)?,
            "fractions" => {
                let parts = list(v)
                    .iter()
                    .map(|p| num::<f64>(key, p))
                    .collect::<Result<Vec<_>, _>>()?;
                self.fractions = parts
                    .try_into()
                    .map_err(|_| "fractions: expected three values train,val,test".to_string())?;
            }
            "labels" => self.labels = list(v),
            "knn_k" => self.knn_k = num(key, v)?,
            "logreg_epochs" => self.logreg_epochs = num(key, v)?,
            "logreg_lr" => self.logreg_lr = num(key, v)?,
            other => return Err(format!("unknown configuration key '{other}'")),
        }
        Ok(())
    }

    /// Every key in a fixed order, values in the syntax [`RunConfig::set`] accepts.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let fr = self.fractions.map(|f| f.to_string()).join(",");
        vec![
            ("sample_rate", self.sample_rate.to_string()),
            ("frame_len", self.frame_len.to_string()),
            ("hop", self.hop.to_string()),
            ("n_mels", self.n_mels.to_string()),
            ("n_mfcc", self.n_mfcc.to_string()),
            ("fmin", self.fmin.to_string()),
            ("fmax", self.fmax.to_string()),
            ("delta_width", self.delta_width.to_string()),
            ("segment_seconds", self.segment_seconds.to_string()),
            ("hidden", self.hidden.to_string()),
            ("layers", self.layers.to_string()),
            ("dense_hidden", self.dense_hidden.to_string()),
            ("head", self.head.as_str().to_string()),
            ("bidirectional", self.bidirectional.to_string()),
            ("lr", self.lr.to_string()),
            ("batch", self.batch.to_string()),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("clip_norm", self.clip_norm.to_string()),
            ("seed", self.seed.to_string()),
            ("deterministic", self.deterministic.to_string()),
            ("fractions", fr),
            ("labels", self.labels.join(",")),
            ("knn_k", self.knn_k.to_string()),
            ("logreg_epochs", self.logreg_epochs.to_string()),
            ("logreg_lr", self.logreg_lr.to_string()),
        ]
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (k, v) in map {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            self.set(k, v).map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.apply_text(&text)
            .map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn resolved_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.labels.len() < 2 {
            return Err("labels: need at least two genres".into());
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(format!("labels: duplicate '{dup}'"));
        }
        if self.labels.iter().any(|l| l.contains(',')) {
            return Err("labels may not contain commas".into());
        }
        if self.fractions.iter().any(|&f| !(f > 0.0)) || (self.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err("fractions must be positive and sum to 1".into());
        }
        if !(self.segment_seconds > 0.0) {
            return Err("segment_seconds must be > 0".into());
        }
        if self.frame_len == 0 || self.hop == 0 || self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return Err("need frame_len, hop > 0 and 0 < n_mfcc <= n_mels".into());
        }
        if self.knn_k == 0 {
            return Err("knn_k must be >= 1".into());
        }
        self.train_config()
            .validate()
            .map_err(|e| e.to_string())
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            sample_rate: self.sample_rate,
            frame_len: self.frame_len,
            hop: self.hop,
            n_mels: self.n_mels,
            n_mfcc: self.n_mfcc,
            fmin: self.fmin,
            fmax: self.fmax,
            delta_width: self.delta_width,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.feature_config().dim(),
            hidden: self.hidden,
            layers: self.layers,
            dense_hidden: self.dense_hidden,
            classes: self.labels.len(),
            head: self.head,
            bidirectional: self.bidirectional,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            arch: self.architecture(),
            batch_size: self.batch,
            max_epochs: self.epochs,
            patience: self.patience,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            clip_norm: self.clip_norm,
            seed: self.seed,
            deterministic: self.deterministic,
            verbose: false,
        }
    }

    pub fn compare_config(&self) -> CompareConfig {
        CompareConfig {
            train: self.train_config(),
            k: self.knn_k,
            logreg_epochs: self.logreg_epochs,
            logreg_lr: self.logreg_lr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\nhidden = 32\nhead=frame\nfractions = 0.6, 0.2, 0.2\nlabels=a,b,c\n")
            .unwrap();
        assert_eq!(cfg.hidden, 32);
        assert_eq!(cfg.head, Head::Frame);
        let mut again = RunConfig::default();
        again.apply_text(&cfg.resolved_text()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(RunConfig::from_map(&cfg.to_map()).unwrap(), cfg);
    }

    #[test]
    fn defaults_are_valid_and_rejections_work() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.architecture().input_dim, 38);
        assert_eq!(cfg.architecture().classes, 10);

        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("colour = blue").unwrap_err().contains("unknown"));
        assert!(cfg.apply_text("hidden").is_err());
        cfg.set("fractions", "0.5,0.5,0.5").unwrap();
        assert!(cfg.validate().is_err());
    }
}
