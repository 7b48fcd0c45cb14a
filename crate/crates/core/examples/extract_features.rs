//! 38-column MFCC + delta + chroma sequence for one synthetic segment,
//! written to and read back from a `BMFX1` container.
//!
//! ```bash
//! cargo run --release --example extract_features
//! ```

use genrenet::audio_io::{AudioClip, CANONICAL_RATE};
use genrenet::features::{read_features, write_features, FeatureConfig, FeatureExtractor, AUX_NAMES};

fn main() -> anyhow::Result<()> {
    let sr = CANONICAL_RATE as f64;
    // C5 (523.25 Hz) with a slow tremolo
    let samples = (0..(5.0 * sr) as usize)
        .map(|i| {
            let t = i as f64 / sr;
            let env = 0.6 + 0.4 * (2.0 * std::f64::consts::PI * 3.0 * t).sin();
            env * (2.0 * std::f64::consts::PI * 523.25 * t).sin()
        })
        .collect();
    let clip = AudioClip::new(samples, CANONICAL_RATE, "c5.wav");

    let extractor = FeatureExtractor::new(FeatureConfig::default())?;
    let out = extractor.extract(&clip)?;
    let x = &out.sequence.x;
    println!("sequence: {} frames x {} features", x.rows(), x.cols());

    let chroma_mean: Vec<f64> = (26..38)
        .map(|c| x.column(c).iter().sum::<f64>() / x.rows() as f64)
        .collect();
    let names = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];
    let top = (0..12).max_by(|&a, &b| chroma_mean[a].total_cmp(&chroma_mean[b])).unwrap();
    println!("dominant pitch class: {}", names[top]);
    println!("first frame MFCC: {:.2?}", &x.row(0)[..13]);
    for (name, v) in AUX_NAMES.iter().zip(out.aux_mean()) {
        println!("{name:>10}: {v:.4}");
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("c5.bmfx");
    write_features(&path, &out.sequence, Some(0), Some(out.aux_mean()), "0")?;
    let (back, meta) = read_features(&path)?;
    println!("round trip: T={} d={} source={}", meta.t, meta.d, back.source);
    Ok(())
}
