//! Framing, STFT power, mel filterbank, MFCC, deltas, chroma and the
//! scalar spectral descriptors.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::FeatureError;
use crate::audio_io::AudioClip;
use crate::nn::Tensor2;

/// Floor added to mel energies before the log.
pub const LOG_FLOOR: f64 = 1e-10;
/// Fraction of total power below the roll-off frequency.
pub const ROLLOFF_PERCENTILE: f64 = 0.85;

/// Un-windowed analysis frames, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub frames: Tensor2,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl FrameMatrix {
    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }
}

/// Row `t` holds samples `[t*hop, t*hop + frame_len)`.
pub fn frame_signal(
    clip: &AudioClip,
    frame_len: usize,
    hop: usize,
) -> Result<FrameMatrix, FeatureError> {
    if hop == 0 || frame_len == 0 {
        return Err(FeatureError::InvalidArgument(
            "frame length and hop must be > 0".into(),
        ));
    }
    let len = clip.samples.len();
    if frame_len > len {
        return Err(FeatureError::FrameLongerThanClip { frame_len, len });
    }
    let n = (len - frame_len) / hop + 1;
    let mut frames = Tensor2::zeros(n, frame_len);
    for t in 0..n {
        frames
            .row_mut(t)
            .copy_from_slice(&clip.samples[t * hop..t * hop + frame_len]);
    }
    Ok(FrameMatrix {
        frames,
        frame_len,
        hop,
        sample_rate: clip.sample_rate,
    })
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Reusable STFT state: window and FFT plan for one frame length.
pub struct Stft {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(n_fft: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Self {
            window: hann_window(n_fft),
            fft,
        }
    }

    pub fn n_fft(&self) -> usize {
        self.window.len()
    }

    /// One-sided `|X_t[k]|^2` for `k = 0..=n_fft/2` of each Hann-windowed frame.
    pub fn power(&self, frames: &FrameMatrix) -> Result<Tensor2, FeatureError> {
        let n_fft = self.n_fft();
        if frames.frame_len != n_fft {
            return Err(FeatureError::ShapeMismatch(format!(
                "frame length {} != n_fft {}",
                frames.frame_len, n_fft
            )));
        }
        let n_bins = n_fft / 2 + 1;
        let mut out = Tensor2::zeros(frames.n_frames(), n_bins);
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..frames.n_frames() {
            for ((b, &x), &w) in buf.iter_mut().zip(frames.frames.row(t)).zip(&self.window) {
                *b = Complex::new(x * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (o, c) in out.row_mut(t).iter_mut().zip(&buf[..n_bins]) {
                *o = c.norm_sqr();
            }
        }
        Ok(out)
    }
}

/// Power spectrogram with `n_fft = frame_len`.
pub fn stft_power(frames: &FrameMatrix) -> Result<Tensor2, FeatureError> {
    Stft::new(frames.frame_len).power(frames)
}

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters over FFT bins, peak weight 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterBank {
    /// `n_mels x (n_fft/2 + 1)`.
    pub weights: Tensor2,
    pub fmin: f64,
    pub fmax: f64,
    pub sample_rate: u32,
}

impl MelFilterBank {
    pub fn n_mels(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.cols()
    }
}

pub fn build_mel_filterbank(
    n_mels: usize,
    n_fft: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
) -> Result<MelFilterBank, FeatureError> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_mels < 2 || !(0.0 <= fmin && fmin < fmax && fmax <= nyquist) || n_fft < 2 {
        return Err(FeatureError::InvalidArgument(format!(
            "mel filterbank needs n_mels >= 2 and 0 <= fmin < fmax <= {nyquist} \
             (got n_mels={n_mels}, fmin={fmin}, fmax={fmax})"
        )));
    }
    let n_bins = n_fft / 2 + 1;
    let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let bins: Vec<usize> = (0..n_mels + 2)
        .map(|i| {
            let hz = mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64);
            (((n_fft + 1) as f64 * hz / sample_rate as f64).floor() as usize).min(n_bins - 1)
        })
        .collect();

    let mut weights = Tensor2::zeros(n_mels, n_bins);
    for m in 0..n_mels {
        let (left, center, right) = (bins[m], bins[m + 1], bins[m + 2]);
        if left == center || center == right {
            return Err(FeatureError::DegenerateBand { filter: m });
        }
        let row = weights.row_mut(m);
        for k in left..center {
            row[k] = (k - left) as f64 / (center - left) as f64;
        }
        for k in center..=right {
            row[k] = (right - k) as f64 / (right - center) as f64;
        }
    }
    Ok(MelFilterBank {
        weights,
        fmin,
        fmax,
        sample_rate,
    })
}

/// Orthonormal DCT-II basis, `n_out x n_in`.
pub fn dct_matrix(n_out: usize, n_in: usize) -> Tensor2 {
    let mut m = Tensor2::zeros(n_out, n_in);
    let n = n_in as f64;
    for k in 0..n_out {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        for i in 0..n_in {
            m.set(k, i, scale * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos());
        }
    }
    m
}

/// Log mel energies of a power spectrogram.
pub fn log_mel(spec: &Tensor2, bank: &MelFilterBank) -> Result<Tensor2, FeatureError> {
    if spec.cols() != bank.n_bins() {
        return Err(FeatureError::ShapeMismatch(format!(
            "spectrogram has {} bins, filterbank expects {}",
            spec.cols(),
            bank.n_bins()
        )));
    }
    let mut energies = Tensor2::matmul(spec.view(), bank.weights.view().t());
    energies
        .data_mut()
        .iter_mut()
        .for_each(|e| *e = (*e + LOG_FLOOR).ln());
    Ok(energies)
}

pub fn mfcc(spec: &Tensor2, bank: &MelFilterBank, n_mfcc: usize) -> Result<Tensor2, FeatureError> {
    if n_mfcc > bank.n_mels() {
        return Err(FeatureError::InvalidArgument(format!(
            "n_mfcc {} exceeds n_mels {}",
            n_mfcc,
            bank.n_mels()
        )));
    }
    let logs = log_mel(spec, bank)?;
    let dct = dct_matrix(n_mfcc, bank.n_mels());
    Ok(Tensor2::matmul(logs.view(), dct.view().t()))
}

/// Regression deltas over `2*half_width + 1` frames with edge replication.
pub fn delta(feat: &Tensor2, half_width: usize) -> Result<Tensor2, FeatureError> {
    if half_width == 0 {
        return Err(FeatureError::InvalidArgument("delta half-width must be >= 1".into()));
    }
    let t_len = feat.rows() as isize;
    let denom = 2.0 * (1..=half_width).map(|n| (n * n) as f64).sum::<f64>();
    let mut out = Tensor2::zeros(feat.rows(), feat.cols());
    let clamp = |i: isize| i.clamp(0, t_len - 1) as usize;
    for t in 0..t_len {
        for n in 1..=half_width as isize {
            let ahead = feat.row(clamp(t + n));
            let behind = feat.row(clamp(t - n));
            for ((o, a), b) in out.row_mut(t as usize).iter_mut().zip(ahead).zip(behind) {
                *o += n as f64 * (a - b);
            }
        }
        out.row_mut(t as usize).iter_mut().for_each(|o| *o /= denom);
    }
    Ok(out)
}

/// Pitch class (0 = C) of FFT bin `k >= 1`, equal temperament with A4 = 440 Hz.
pub fn pitch_class(k: usize, n_fft: usize, sample_rate: u32) -> usize {
    let f = k as f64 * sample_rate as f64 / n_fft as f64;
    let semis_from_a = (12.0 * (f / 440.0).log2()).round() as i64;
    (semis_from_a + 9).rem_euclid(12) as usize
}

/// 12-bin chroma, each frame scaled to a maximum of 1.
pub fn chroma(spec: &Tensor2, sample_rate: u32) -> Tensor2 {
    let n_fft = 2 * (spec.cols() - 1);
    let classes: Vec<usize> = (0..spec.cols())
        .map(|k| if k == 0 { usize::MAX } else { pitch_class(k, n_fft, sample_rate) })
        .collect();
    let mut out = Tensor2::zeros(spec.rows(), 12);
    for t in 0..spec.rows() {
        let row = out.row_mut(t);
        for (k, &p) in spec.row(t).iter().enumerate().skip(1) {
            row[classes[k]] += p;
        }
        let max = row.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            row.iter_mut().for_each(|v| *v /= max);
        }
    }
    out
}

/// Per-frame ZCR, spectral centroid, roll-off, bandwidth and RMS (columns in that order).
pub fn aux_descriptors(frames: &FrameMatrix, spec: &Tensor2) -> Result<Tensor2, FeatureError> {
    if frames.n_frames() != spec.rows() {
        return Err(FeatureError::ShapeMismatch(format!(
            "{} frames vs {} spectrogram rows",
            frames.n_frames(),
            spec.rows()
        )));
    }
    let n_fft = 2 * (spec.cols() - 1);
    let bin_hz = frames.sample_rate as f64 / n_fft as f64;
    let mut out = Tensor2::zeros(spec.rows(), 5);
    for t in 0..spec.rows() {
        let x = frames.frames.row(t);
        let crossings = x
            .windows(2)
            .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
            .count();
        let zcr = if x.len() > 1 {
            crossings as f64 / (x.len() - 1) as f64
        } else {
            0.0
        };
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();

        let p = spec.row(t);
        let total: f64 = p.iter().sum();
        let (centroid, rolloff, bandwidth) = if total > 0.0 {
            let centroid = p
                .iter()
                .enumerate()
                .map(|(k, pk)| k as f64 * bin_hz * pk)
                .sum::<f64>()
                / total;
            let threshold = ROLLOFF_PERCENTILE * total;
            let mut cum = 0.0;
            let mut rolloff = (p.len() - 1) as f64 * bin_hz;
            for (k, pk) in p.iter().enumerate() {
                cum += pk;
                if cum >= threshold {
                    rolloff = k as f64 * bin_hz;
                    break;
                }
            }
            let spread = p
                .iter()
                .enumerate()
                .map(|(k, pk)| pk * (k as f64 * bin_hz - centroid).powi(2))
                .sum::<f64>()
                / total;
            (centroid, rolloff, spread.sqrt())
        } else {
            (0.0, 0.0, 0.0)
        };
        out.row_mut(t)
            .copy_from_slice(&[zcr, centroid, rolloff, bandwidth, rms]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: Vec<f64>, sr: u32) -> AudioClip {
        AudioClip::new(samples, sr, "t")
    }

    /// O(N^2) one-sided power spectrum of one windowed frame.
    fn dft_power(frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        let w = hann_window(n);
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, (&x, &wi)) in frame.iter().zip(&w).enumerate() {
                    let ph = 2.0 * PI * ((k * i) % n) as f64 / n as f64;
                    re += x * wi * ph.cos();
                    im -= x * wi * ph.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn framing_indexes_ramp() {
        let c = clip((0..10).map(f64::from).collect(), 10);
        let f = frame_signal(&c, 4, 2).unwrap();
        assert_eq!(f.n_frames(), 4);
        assert_eq!(f.frames.row(0), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(f.frames.row(3), &[6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn canonical_segment_gives_212_frames() {
        let c = clip(vec![0.0; 110_250], 22_050);
        assert_eq!(frame_signal(&c, 2048, 512).unwrap().n_frames(), 212);
        assert!(matches!(
            frame_signal(&clip(vec![0.0; 100], 22_050), 2048, 512),
            Err(FeatureError::FrameLongerThanClip { .. })
        ));
    }

    #[test]
    fn stft_of_silence_and_dc() {
        let zero = frame_signal(&clip(vec![0.0; 4096], 22_050), 2048, 512).unwrap();
        assert!(stft_power(&zero).unwrap().data().iter().all(|&v| v == 0.0));

        let c = 0.3;
        let dc = frame_signal(&clip(vec![c; 2048], 22_050), 2048, 512).unwrap();
        let p = stft_power(&dc).unwrap();
        let wsum: f64 = hann_window(2048).iter().sum();
        assert!((p.get(0, 0) - (c * wsum).powi(2)).abs() < 1e-9 * (c * wsum).powi(2));
        // periodic Hann leaks DC into bin 1 only
        assert!(p.row(0)[2..].iter().all(|&v| v < 1e-18));
    }

    #[test]
    fn stft_matches_direct_dft_for_bin_centred_sine() {
        let f0 = 32.0 * 22_050.0 / 2048.0;
        let x: Vec<f64> = (0..2048)
            .map(|n| (2.0 * PI * f0 * n as f64 / 22_050.0).sin())
            .collect();
        let frames = frame_signal(&clip(x.clone(), 22_050), 2048, 512).unwrap();
        let p = stft_power(&frames).unwrap();
        let oracle = dft_power(&x);
        let peak = p.row(0).iter().cloned().fold(0.0, f64::max);
        assert_eq!(p.get(0, 32), peak);
        for k in 28..=36 {
            let (a, b) = (p.get(0, k), oracle[k]);
            assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-9 * peak), "bin {k}");
        }
    }

    #[test]
    fn mel_formula_and_bank_shape() {
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
        let bank = build_mel_filterbank(40, 2048, 22_050, 0.0, 11_025.0).unwrap();
        assert_eq!(bank.weights.shape(), (40, 1025));
        for m in 0..40 {
            let row = bank.weights.row(m);
            assert!(row.iter().sum::<f64>() > 0.0);
            assert!(row.iter().all(|&w| w >= 0.0));
            let peak = row.iter().cloned().fold(0.0, f64::max);
            assert_eq!(peak, 1.0);
            assert_eq!(row.iter().filter(|&&w| w == peak).count(), 1);
        }
        // adjacent filters overlap
        for m in 0..39 {
            let a = bank.weights.row(m);
            let b = bank.weights.row(m + 1);
            assert!(a.iter().zip(b).any(|(x, y)| *x > 0.0 && *y > 0.0));
        }
    }

    #[test]
    fn mel_bank_errors() {
        assert!(matches!(
            build_mel_filterbank(40, 2048, 22_050, 100.0, 100.0),
            Err(FeatureError::InvalidArgument(_))
        ));
        assert!(matches!(
            build_mel_filterbank(128, 256, 22_050, 0.0, 11_025.0),
            Err(FeatureError::DegenerateBand { .. })
        ));
    }

    #[test]
    fn mfcc_of_flat_mel_energies() {
        // one-hot spectrogram columns chosen so that each filter sees energy c:
        // use the bank's peak bins.
        let bank = build_mel_filterbank(40, 2048, 22_050, 0.0, 11_025.0).unwrap();
        let c = 2.5;
        let mut spec = Tensor2::zeros(1, 1025);
        for m in 0..40 {
            let peak = bank.weights.row(m).iter().position(|&w| w == 1.0).unwrap();
            spec.set(0, peak, c);
        }
        // peak bins of neighbours fall inside each other's skirts, so compute
        // the resulting energies and check the DCT against them instead.
        let logs = log_mel(&spec, &bank).unwrap();
        let m = mfcc(&spec, &bank, 13).unwrap();
        let mean: f64 = logs.row(0).iter().sum::<f64>() / 40.0;
        assert!((m.get(0, 0) - 40f64.sqrt() * mean).abs() < 1e-9);

        let zeros = Tensor2::zeros(3, 1025);
        let m = mfcc(&zeros, &bank, 13).unwrap();
        for t in 0..3 {
            assert!((m.get(t, 0) - 40f64.sqrt() * LOG_FLOOR.ln()).abs() < 1e-9);
            assert!(m.row(t)[1..].iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn dct_of_constant_is_dc_only() {
        let dct = dct_matrix(13, 40);
        let x = Tensor2::filled(1, 40, 1.7);
        let y = Tensor2::matmul(x.view(), dct.view().t());
        assert!((y.get(0, 0) - 40f64.sqrt() * 1.7).abs() < 1e-12);
        assert!(y.row(0)[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn delta_edge_cases() {
        let constant = Tensor2::filled(10, 3, 4.2);
        assert!(delta(&constant, 4).unwrap().data().iter().all(|&v| v == 0.0));

        let a = 0.75;
        let ramp = Tensor2::from_vec(20, 1, (0..20).map(|t| a * t as f64).collect());
        let d = delta(&ramp, 4).unwrap();
        for t in 4..16 {
            assert!((d.get(t, 0) - a).abs() < 1e-12);
        }
        let single = Tensor2::from_vec(1, 2, vec![3.0, -1.0]);
        assert!(delta(&single, 4).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(delta(&single, 0).is_err());
    }

    #[test]
    fn chroma_pitch_classes() {
        let tone = |f: f64| -> Tensor2 {
            let x: Vec<f64> = (0..22_050)
                .map(|n| 0.5 * (2.0 * PI * f * n as f64 / 22_050.0).sin())
                .collect();
            let frames = frame_signal(&clip(x, 22_050), 2048, 512).unwrap();
            chroma(&stft_power(&frames).unwrap(), 22_050)
        };
        let argmax = |r: &[f64]| {
            r.iter()
                .enumerate()
                .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0
        };
        let a = tone(440.0);
        assert!((0..a.rows()).all(|t| argmax(a.row(t)) == 9));
        let c = tone(261.63);
        assert!((0..c.rows()).all(|t| argmax(c.row(t)) == 0));
        assert!(chroma(&Tensor2::zeros(4, 1025), 22_050).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pitch_class_table_matches_scripted_mapping() {
        // A4 bin ~40.9, C4 ~24.3, A5 ~81.7
        assert_eq!(pitch_class(41, 2048, 22_050), 9);
        assert_eq!(pitch_class(24, 2048, 22_050), 0);
        assert_eq!(pitch_class(82, 2048, 22_050), 9);
        for k in 1..1025 {
            let f = k as f64 * 22_050.0 / 2048.0;
            let midi = 69.0 + 12.0 * (f / 440.0).log2();
            assert_eq!(pitch_class(k, 2048, 22_050), (midi.round() as i64).rem_euclid(12) as usize);
        }
    }

    #[test]
    fn aux_descriptor_cases() {
        let alt: Vec<f64> = (0..2048).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let frames = frame_signal(&clip(alt, 22_050), 2048, 512).unwrap();
        let aux = aux_descriptors(&frames, &stft_power(&frames).unwrap()).unwrap();
        assert_eq!(aux.get(0, 0), 1.0);
        assert!((aux.get(0, 4) - 1.0).abs() < 1e-12);

        let silent = frame_signal(&clip(vec![0.0; 2048], 22_050), 2048, 512).unwrap();
        let aux = aux_descriptors(&silent, &stft_power(&silent).unwrap()).unwrap();
        assert!(aux.data().iter().all(|&v| v == 0.0));

        let bin_hz = 22_050.0 / 2048.0;
        let f0 = 32.0 * bin_hz;
        let x: Vec<f64> = (0..2048)
            .map(|n| (2.0 * PI * f0 * n as f64 / 22_050.0).sin())
            .collect();
        let frames = frame_signal(&clip(x, 22_050), 2048, 512).unwrap();
        let aux = aux_descriptors(&frames, &stft_power(&frames).unwrap()).unwrap();
        assert!((aux.get(0, 1) - f0).abs() < bin_hz);
        assert!((aux.get(0, 2) - f0).abs() <= bin_hz);
        // Hann main lobe: energy in bins 31..=33 only, spread well under a bin
        assert!(aux.get(0, 3) < bin_hz);
    }
}
