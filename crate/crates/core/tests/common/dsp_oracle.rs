//! Brute-force MFCC/chroma reference: direct DFT, explicit filterbank
//! summation and direct DCT sums. Shares no code with the library pipeline.

use std::f64::consts::PI;

pub struct OracleFeatures {
    /// frames x n_mfcc
    pub mfcc: Vec<Vec<f64>>,
    /// per-frame argmax pitch class (0 = C)
    pub chroma_argmax: Vec<usize>,
}

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

pub fn features(
    samples: &[f64],
    sr: f64,
    n_fft: usize,
    hop: usize,
    n_mels: usize,
    n_mfcc: usize,
) -> OracleFeatures {
    let n_bins = n_fft / 2 + 1;
    let cos_tab: Vec<f64> = (0..n_fft).map(|i| (2.0 * PI * i as f64 / n_fft as f64).cos()).collect();
    let sin_tab: Vec<f64> = (0..n_fft).map(|i| (2.0 * PI * i as f64 / n_fft as f64).sin()).collect();

    // filter edges in FFT bins
    let edges: Vec<usize> = (0..n_mels + 2)
        .map(|i| {
            let m = mel(0.0) + (mel(sr / 2.0) - mel(0.0)) * i as f64 / (n_mels as f64 + 1.0);
            let b = ((n_fft as f64 + 1.0) * inv_mel(m) / sr).floor() as usize;
            b.min(n_bins - 1)
        })
        .collect();

    let mut out = OracleFeatures {
        mfcc: Vec::new(),
        chroma_argmax: Vec::new(),
    };
    let n_frames = (samples.len() - n_fft) / hop + 1;
    for t in 0..n_frames {
        let frame: Vec<f64> = (0..n_fft)
            .map(|n| {
                let w = 0.5 * (1.0 - (2.0 * PI * n as f64 / n_fft as f64).cos());
                w * samples[t * hop + n]
            })
            .collect();

        let mut power = vec![0.0; n_bins];
        for (k, p) in power.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &x) in frame.iter().enumerate() {
                let idx = (k * n) % n_fft;
                re += x * cos_tab[idx];
                im -= x * sin_tab[idx];
            }
            *p = re * re + im * im;
        }

        let mut log_e = vec![0.0; n_mels];
        for (m, le) in log_e.iter_mut().enumerate() {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut e = 0.0;
            for (k, &p) in power.iter().enumerate() {
                let w = if k >= l && k < c {
                    (k - l) as f64 / (c - l) as f64
                } else if k >= c && k <= r {
                    (r - k) as f64 / (r - c) as f64
                } else {
                    0.0
                };
                e += w * p;
            }
            *le = (e + 1e-10).ln();
        }

        let mut coeffs = vec![0.0; n_mfcc];
        for (q, c) in coeffs.iter_mut().enumerate() {
            let mut s = 0.0;
            for (m, &v) in log_e.iter().enumerate() {
                s += v * (PI * q as f64 * (m as f64 + 0.5) / n_mels as f64).cos();
            }
            let norm = if q == 0 { 1.0 / n_mels as f64 } else { 2.0 / n_mels as f64 };
            *c = s * norm.sqrt();
        }
        out.mfcc.push(coeffs);

        let mut pcs = [0.0f64; 12];
        for (k, &p) in power.iter().enumerate().skip(1) {
            let f = k as f64 * sr / n_fft as f64;
            let midi = 69.0 + 12.0 * (f / 440.0).log2();
            let pc = (midi.round() as i64).rem_euclid(12) as usize;
            pcs[pc] += p;
        }
        let mut best = 0;
        for c in 1..12 {
            if pcs[c] > pcs[best] {
                best = c;
            }
        }
        out.chroma_argmax.push(best);
    }
    out
}
