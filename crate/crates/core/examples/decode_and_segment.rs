//! WAV round trip, resampling and 5 s segmentation.
//!
//! ```bash
//! cargo run --release --example decode_and_segment
//! ```

use genrenet::audio_io::{decode_wav, encode_wav_pcm16, resample, segment, AudioClip, CANONICAL_RATE, SEGMENT_SECONDS};

fn main() -> anyhow::Result<()> {
    // 12 s of a 440 Hz tone at 44.1 kHz
    let sr = 44_100;
    let samples = (0..12 * sr)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / sr as f64).sin())
        .collect();
    let clip = AudioClip::new(samples, sr as u32, "tone.wav");

    let bytes = encode_wav_pcm16(&clip);
    let decoded = decode_wav(&bytes)?;
    println!(
        "decoded {} samples at {} Hz ({:.2} s), {} bytes on disk",
        decoded.len(),
        decoded.sample_rate,
        decoded.duration_seconds(),
        bytes.len()
    );

    let canonical = resample(&decoded, CANONICAL_RATE)?;
    println!("resampled to {} Hz: {} samples", canonical.sample_rate, canonical.len());

    let segments = segment(&canonical, SEGMENT_SECONDS)?;
    println!("{} segments of {} samples", segments.len(), segments[0].len());
    Ok(())
}
