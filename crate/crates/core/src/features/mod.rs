//! Per-frame acoustic features.
//!
//! The model input for frame `t` is `[MFCC(t) | ΔMFCC(t) | chroma(t)]`,
//! 13 + 13 + 12 = 38 columns under the default configuration. The scalar
//! descriptors (ZCR, centroid, roll-off, bandwidth, RMS) are computed
//! alongside but only feed the classical baselines.

pub mod container;
pub mod dsp;
pub mod normalize;

use thiserror::Error;

use crate::audio_io::{AudioClip, AudioError};
use crate::nn::Tensor2;

pub use container::{read_features, read_norm_stats, write_features, write_norm_stats, FeatureMeta};
pub use dsp::{
    aux_descriptors, build_mel_filterbank, chroma, delta, frame_signal, mfcc, stft_power,
    FrameMatrix, MelFilterBank, Stft,
};
pub use normalize::{apply_normalizer, fit_normalizer, NormStats, SIGMA_FLOOR};

/// Number of aux descriptor columns.
pub const N_AUX: usize = 5;
pub const AUX_NAMES: [&str; N_AUX] = ["zcr", "centroid", "rolloff", "bandwidth", "rms"];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("frame length {frame_len} exceeds clip length {len}")]
    FrameLongerThanClip { frame_len: usize, len: usize },
    #[error("mel filter {filter} is empty: adjacent mel points share an FFT bin")]
    DegenerateBand { filter: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bad magic: not a feature container")]
    BadMagic,
    #[error("feature container truncated: {0}")]
    Truncated(String),
    #[error("bad feature metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Feature pipeline parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub delta_width: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: crate::audio_io::CANONICAL_RATE,
            frame_len: 2048,
            hop: 512,
            n_mels: 40,
            n_mfcc: 13,
            fmin: 0.0,
            fmax: crate::audio_io::CANONICAL_RATE as f64 / 2.0,
            delta_width: 4,
        }
    }
}

impl FeatureConfig {
    /// Columns of the assembled sequence.
    pub fn dim(&self) -> usize {
        2 * self.n_mfcc + 12
    }
}

/// `T x d` feature matrix of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub x: Tensor2,
    pub label: Option<String>,
    pub source: String,
}

impl FeatureSequence {
    pub fn new(x: Tensor2, label: Option<String>, source: impl Into<String>) -> Self {
        Self {
            x,
            label,
            source: source.into(),
        }
    }

    pub fn frames(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }
}

/// Everything extracted from one segment.
#[derive(Debug, Clone)]
pub struct Extracted {
    pub sequence: FeatureSequence,
    /// `T x 5`, columns as in [`AUX_NAMES`].
    pub aux: Tensor2,
}

impl Extracted {
    pub fn aux_mean(&self) -> Vec<f64> {
        let t = self.aux.rows().max(1) as f64;
        self.aux.column_sums().data().iter().map(|s| s / t).collect()
    }
}

/// Holds the precomputed window, FFT plan and filterbank for a configuration.
pub struct FeatureExtractor {
    config: FeatureConfig,
    stft: Stft,
    bank: MelFilterBank,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self, FeatureError> {
        let bank = build_mel_filterbank(
            config.n_mels,
            config.frame_len,
            config.sample_rate,
            config.fmin,
            config.fmax,
        )?;
        Ok(Self {
            stft: Stft::new(config.frame_len),
            bank,
            config,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterBank {
        &self.bank
    }

    /// Sequence plus aux descriptors for one segment.
    pub fn extract(&self, clip: &AudioClip) -> Result<Extracted, FeatureError> {
        if clip.sample_rate != self.config.sample_rate {
            return Err(FeatureError::InvalidArgument(format!(
                "clip rate {} Hz, extractor expects {} Hz",
                clip.sample_rate, self.config.sample_rate
            )));
        }
        let frames = frame_signal(clip, self.config.frame_len, self.config.hop)?;
        let spec = self.stft.power(&frames)?;
        let ceps = mfcc(&spec, &self.bank, self.config.n_mfcc)?;
        let deltas = delta(&ceps, self.config.delta_width)?;
        let chroma = chroma(&spec, self.config.sample_rate);
        let aux = aux_descriptors(&frames, &spec)?;

        let t_len = ceps.rows();
        let n = self.config.n_mfcc;
        let mut x = Tensor2::zeros(t_len, self.config.dim());
        for t in 0..t_len {
            let row = x.row_mut(t);
            row[..n].copy_from_slice(ceps.row(t));
            row[n..2 * n].copy_from_slice(deltas.row(t));
            row[2 * n..].copy_from_slice(chroma.row(t));
        }
        Ok(Extracted {
            sequence: FeatureSequence::new(x, None, clip.source_path.clone()),
            aux,
        })
    }

    pub fn assemble(&self, clip: &AudioClip) -> Result<FeatureSequence, FeatureError> {
        Ok(self.extract(clip)?.sequence)
    }
}

/// Assemble the default 38-column sequence for a canonical segment.
pub fn assemble(clip: &AudioClip) -> Result<FeatureSequence, FeatureError> {
    FeatureExtractor::new(FeatureConfig::default())?.assemble(clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn segment_of(f: impl Fn(usize) -> f64) -> AudioClip {
        AudioClip::new((0..110_250).map(f).collect(), 22_050, "seg")
    }

    #[test]
    fn silent_segment_features() {
        let seq = assemble(&segment_of(|_| 0.0)).unwrap();
        assert_eq!(seq.x.shape(), (212, 38));
        let c0 = 40f64.sqrt() * dsp::LOG_FLOOR.ln();
        for t in 0..212 {
            let row = seq.x.row(t);
            assert!((row[0] - c0).abs() < 1e-9);
            assert!(row[1..].iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn tone_segment_chroma_is_a() {
        let seq = assemble(&segment_of(|n| 0.4 * (2.0 * PI * 440.0 * n as f64 / 22_050.0).sin()))
            .unwrap();
        assert_eq!(seq.x.shape(), (212, 38));
        for t in 0..212 {
            let chroma = &seq.x.row(t)[26..];
            let best = chroma
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(best, 9);
        }
    }

    #[test]
    fn assemble_is_deterministic_and_finite() {
        let clip = segment_of(|n| ((n * 7919) % 1000) as f64 / 1000.0 - 0.5);
        let a = assemble(&clip).unwrap();
        let b = assemble(&clip).unwrap();
        assert!(a.x.data().iter().zip(b.x.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.x.is_finite());
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let clip = AudioClip::new(vec![0.0; 50_000], 16_000, "x");
        assert!(assemble(&clip).is_err());
    }
}
