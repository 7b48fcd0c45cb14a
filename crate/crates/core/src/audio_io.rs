//! WAV decoding, sample-rate conversion and fixed-length segmentation.
//!
//! Everything downstream works on [`AudioClip`]: a mono waveform in
//! `[-1.0, 1.0]` with its sample rate. Only RIFF/WAVE containers holding
//! integer PCM (8/16/24/32-bit) or 32-bit IEEE float are accepted.

use std::f64::consts::PI;
use std::path::Path;

use thiserror::Error;

/// Canonical analysis rate.
pub const CANONICAL_RATE: u32 = 22_050;
/// Canonical segment duration in seconds.
pub const SEGMENT_SECONDS: f64 = 5.0;

/// Taps on each side of the interpolation point used by [`resample`].
const SINC_HALF_TAPS: i64 = 32;

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAVE container: {0}")]
    MalformedContainer(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("data chunk holds no samples")]
    EmptyAudio,
    #[error("clip of {len} samples is shorter than half a segment ({segment} samples)")]
    ClipTooShort { len: usize, segment: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Decoded mono waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_path: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_path: impl Into<String>) -> Self {
        Self {
            samples,
            sample_rate,
            source_path: source_path.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

struct FormatChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FormatChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedContainer(format!(
            "fmt chunk is {} bytes, need at least 16",
            body.len()
        )));
    }
    let mut format = read_u16(body, 0);
    let channels = read_u16(body, 2);
    let sample_rate = read_u32(body, 4);
    let block_align = read_u16(body, 12);
    let bits = read_u16(body, 14);
    if format == FORMAT_EXTENSIBLE {
        // cbSize, valid bits, channel mask, then the sub-format GUID whose
        // first two bytes carry the actual format code.
        if body.len() < 26 {
            return Err(AudioError::MalformedContainer(
                "WAVE_FORMAT_EXTENSIBLE fmt chunk too short".into(),
            ));
        }
        format = read_u16(body, 24);
    }
    Ok(FormatChunk {
        format,
        channels,
        sample_rate,
        block_align,
        bits,
    })
}

/// Decode a RIFF/WAVE byte stream into a mono clip at the file's native rate.
///
/// Integer samples are scaled by `1/2^(bits-1)` (8-bit data is unsigned and
/// re-centred first); stereo is averaged, then clipped to `[-1, 1]`.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedContainer(
            "missing RIFF/WAVE header".into(),
        ));
    }

    let mut fmt: Option<FormatChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).ok_or_else(|| {
            AudioError::MalformedContainer("chunk size overflows".into())
        })?;
        if body_end > bytes.len() {
            return Err(AudioError::MalformedContainer(format!(
                "chunk '{}' declares {} bytes but only {} remain",
                String::from_utf8_lossy(id),
                size,
                bytes.len() - body_start
            )));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => {
                data = Some(body);
                break;
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| AudioError::MalformedContainer("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::MalformedContainer("no data chunk".into()))?;

    if fmt.channels == 0 || fmt.channels > 2 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} channels (only mono and stereo are supported)",
            fmt.channels
        )));
    }
    if fmt.sample_rate == 0 {
        return Err(AudioError::MalformedContainer("sample rate is zero".into()));
    }
    let bytes_per_sample = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 8 | 16 | 24 | 32) => fmt.bits as usize / 8,
        (FORMAT_IEEE_FLOAT, 32) => 4,
        (FORMAT_PCM, b) => {
            return Err(AudioError::UnsupportedEncoding(format!("{b}-bit integer PCM")))
        }
        (FORMAT_IEEE_FLOAT, b) => {
            return Err(AudioError::UnsupportedEncoding(format!("{b}-bit float")))
        }
        (code, _) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "format code 0x{code:04x} (compressed codecs are not supported)"
            )))
        }
    };
    let channels = fmt.channels as usize;
    let frame_bytes = bytes_per_sample * channels;
    if fmt.block_align as usize != frame_bytes {
        return Err(AudioError::MalformedContainer(format!(
            "block_align {} does not match {} channels x {} bytes",
            fmt.block_align, channels, bytes_per_sample
        )));
    }
    if data.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    if data.len() % frame_bytes != 0 {
        return Err(AudioError::MalformedContainer(
            "data chunk ends mid-frame".into(),
        ));
    }

    let decode_one = |s: &[u8]| -> f64 {
        match (fmt.format, bytes_per_sample) {
            (FORMAT_PCM, 1) => (s[0] as f64 - 128.0) / 128.0,
            (FORMAT_PCM, 2) => i16::from_le_bytes([s[0], s[1]]) as f64 / 32_768.0,
            (FORMAT_PCM, 3) => {
                let v = i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            (FORMAT_PCM, 4) => {
                i32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64 / 2_147_483_648.0
            }
            _ => f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64,
        }
    };

    let mut samples = Vec::with_capacity(data.len() / frame_bytes);
    for frame in data.chunks_exact(frame_bytes) {
        let mut acc = 0.0;
        for ch in frame.chunks_exact(bytes_per_sample) {
            acc += decode_one(ch);
        }
        let mono = acc / channels as f64;
        if !mono.is_finite() {
            return Err(AudioError::MalformedContainer(
                "non-finite float sample".into(),
            ));
        }
        samples.push(mono.clamp(-1.0, 1.0));
    }

    Ok(AudioClip::new(samples, fmt.sample_rate, ""))
}

/// Read and decode a WAV file, recording its path as provenance.
pub fn decode_wav_file(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut clip = decode_wav(&bytes)?;
    clip.source_path = path.display().to_string();
    Ok(clip)
}

/// Encode a clip as 16-bit mono PCM WAV.
pub fn encode_wav_pcm16(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let v = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Hann-windowed sinc interpolation to `target_rate`.
///
/// The kernel spans 32 input samples on each side of the interpolation point
/// and its cutoff follows the lower of the two Nyquist rates. Weights are
/// renormalized to sum to one, so DC passes unchanged including at the edges.
/// Matching rates return the input untouched.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidArgument("target rate must be > 0".into()));
    }
    if clip.sample_rate == target_rate {
        return Ok(clip.clone());
    }
    let src_rate = clip.sample_rate as f64;
    let ratio = target_rate as f64 / src_rate;
    let cutoff = ratio.min(1.0);
    let n_in = clip.samples.len() as i64;
    let n_out = (clip.samples.len() as f64 * ratio).round() as usize;
    let window_half = (SINC_HALF_TAPS + 1) as f64;

    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        let t = n as f64 / ratio;
        let base = t.floor() as i64;
        let mut acc = 0.0;
        let mut norm = 0.0;
        for k in (base - SINC_HALF_TAPS + 1)..=(base + SINC_HALF_TAPS) {
            if k < 0 || k >= n_in {
                continue;
            }
            let x = t - k as f64;
            let w = cutoff * sinc(cutoff * x) * 0.5 * (1.0 + (PI * x / window_half).cos());
            acc += w * clip.samples[k as usize];
            norm += w;
        }
        let v = if norm.abs() > 1e-12 { acc / norm } else { 0.0 };
        out.push(v.clamp(-1.0, 1.0));
    }
    Ok(AudioClip::new(out, target_rate, clip.source_path.clone()))
}

/// Cut a clip into consecutive non-overlapping segments of `seg_seconds`.
///
/// A trailing remainder of at least half a segment is zero-padded to full
/// length; anything shorter is dropped.
pub fn segment(clip: &AudioClip, seg_seconds: f64) -> Result<Vec<AudioClip>, AudioError> {
    if !(seg_seconds > 0.0) {
        return Err(AudioError::InvalidArgument(
            "segment duration must be > 0".into(),
        ));
    }
    let seg_len = (seg_seconds * clip.sample_rate as f64).round() as usize;
    if seg_len == 0 {
        return Err(AudioError::InvalidArgument(
            "segment shorter than one sample".into(),
        ));
    }
    let len = clip.samples.len();
    if 2 * len < seg_len {
        return Err(AudioError::ClipTooShort { len, segment: seg_len });
    }
    let mut segments: Vec<AudioClip> = clip
        .samples
        .chunks_exact(seg_len)
        .map(|c| AudioClip::new(c.to_vec(), clip.sample_rate, clip.source_path.clone()))
        .collect();
    let rem = len % seg_len;
    if 2 * rem >= seg_len {
        let mut tail = clip.samples[len - rem..].to_vec();
        tail.resize(seg_len, 0.0);
        segments.push(AudioClip::new(tail, clip.sample_rate, clip.source_path.clone()));
    }
    Ok(segments)
}

/// Decode, bring to `rate`, and segment: the whole front half of the pipeline.
pub fn load_segments(
    path: impl AsRef<Path>,
    rate: u32,
    seg_seconds: f64,
) -> Result<Vec<AudioClip>, AudioError> {
    let clip = decode_wav_file(path)?;
    let clip = resample(&clip, rate)?;
    segment(&clip, seg_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(format: u16, channels: u16, bits: u16, rate: u32, data: &[u8]) -> Vec<u8> {
        let block_align = channels * bits / 8;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * block_align as u32).to_le_bytes());
        out.extend_from_slice(&block_align.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn decodes_single_16bit_sample() {
        let bytes = wav_bytes(1, 1, 16, 8000, &16384i16.to_le_bytes());
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.samples, vec![0.5]);
        assert_eq!(clip.sample_rate, 8000);
    }

    #[test]
    fn stereo_is_averaged() {
        let mut data = Vec::new();
        data.extend_from_slice(&32767i16.to_le_bytes());
        data.extend_from_slice(&(-32768i16).to_le_bytes());
        let clip = decode_wav(&wav_bytes(1, 2, 16, 44100, &data)).unwrap();
        // (32767/32768 - 1) / 2
        let expected = -1.0 / 65536.0;
        assert!((clip.samples[0] - expected).abs() < 1e-15);
        assert!((clip.samples[0] + 0.0000153).abs() < 1e-7);
    }

    #[test]
    fn decodes_other_widths() {
        let eight = decode_wav(&wav_bytes(1, 1, 8, 8000, &[0, 128, 255])).unwrap();
        assert_eq!(eight.samples, vec![-1.0, 0.0, 127.0 / 128.0]);

        let v24: i32 = -4_194_304; // -0.5 * 2^23
        let b = v24.to_le_bytes();
        let c24 = decode_wav(&wav_bytes(1, 1, 24, 8000, &b[0..3])).unwrap();
        assert_eq!(c24.samples, vec![-0.5]);

        let c32 = decode_wav(&wav_bytes(1, 1, 32, 8000, &(1i32 << 29).to_le_bytes())).unwrap();
        assert_eq!(c32.samples, vec![0.25]);

        let f = decode_wav(&wav_bytes(3, 1, 32, 8000, &0.75f32.to_le_bytes())).unwrap();
        assert_eq!(f.samples, vec![0.75]);

        let clipped = decode_wav(&wav_bytes(3, 1, 32, 8000, &1.5f32.to_le_bytes())).unwrap();
        assert_eq!(clipped.samples, vec![1.0]);
    }

    #[test]
    fn truncated_data_is_malformed() {
        let data: Vec<u8> = (0..200i16).flat_map(|v| v.to_le_bytes()).collect();
        let bytes = wav_bytes(1, 1, 16, 8000, &data);
        let cut = &bytes[..bytes.len() - 37];
        assert!(matches!(decode_wav(cut), Err(AudioError::MalformedContainer(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            decode_wav(b"not a wav file at all"),
            Err(AudioError::MalformedContainer(_))
        ));
        // MPEG layer 3 format code
        let mp3 = wav_bytes(0x55, 1, 16, 8000, &[0, 0]);
        assert!(matches!(decode_wav(&mp3), Err(AudioError::UnsupportedEncoding(_))));
        let empty = wav_bytes(1, 1, 16, 8000, &[]);
        assert!(matches!(decode_wav(&empty), Err(AudioError::EmptyAudio)));
        let surround = wav_bytes(1, 6, 16, 8000, &[0; 12]);
        assert!(matches!(decode_wav(&surround), Err(AudioError::UnsupportedEncoding(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = wav_bytes(1, 1, 16, 8000, &1000i16.to_le_bytes());
        // splice a LIST chunk with odd length (plus pad byte) before fmt
        let list: Vec<u8> = [b"LIST".as_slice(), &3u32.to_le_bytes(), b"abc", &[0]].concat();
        bytes.splice(12..12, list);
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.samples, vec![1000.0 / 32768.0]);
    }

    #[test]
    fn resample_identity_is_bit_exact() {
        let clip = AudioClip::new(vec![0.1, -0.2, 0.3], 22050, "x");
        assert_eq!(resample(&clip, 22050).unwrap(), clip);
    }

    #[test]
    fn resample_preserves_dc() {
        let clip = AudioClip::new(vec![0.25; 4000], 8000, "dc");
        let up = resample(&clip, 16000).unwrap();
        assert_eq!(up.len(), 8000);
        assert!(up.samples.iter().all(|&s| (s - 0.25).abs() < 1e-3));
    }

    #[test]
    fn resample_keeps_tone_frequency() {
        let src: Vec<f64> = (0..44100)
            .map(|n| 0.5 * (2.0 * PI * 1000.0 * n as f64 / 44100.0).sin())
            .collect();
        let out = resample(&AudioClip::new(src, 44100, "tone"), 22050).unwrap();
        assert_eq!(out.len(), 22050);
        // direct DFT over integer-Hz bins near the candidates
        let power_at = |f: f64| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &x) in out.samples.iter().enumerate() {
                let ph = 2.0 * PI * f * n as f64 / 22050.0;
                re += x * ph.cos();
                im -= x * ph.sin();
            }
            re * re + im * im
        };
        let peak = power_at(1000.0);
        for f in [500.0, 990.0, 1010.0, 2000.0, 5000.0] {
            assert!(power_at(f) < peak * 1e-3, "leak at {f}");
        }
    }

    #[test]
    fn segmentation_rules() {
        let clip = |secs: usize| AudioClip::new(vec![0.1; secs * 100], 100, "c");
        let s = segment(&clip(12), 5.0).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|c| c.len() == 500));

        let s = segment(&clip(8), 5.0).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].samples[299], 0.1);
        assert!(s[1].samples[300..].iter().all(|&v| v == 0.0));

        assert!(matches!(
            segment(&clip(2), 5.0),
            Err(AudioError::ClipTooShort { .. })
        ));
        // exactly half a segment is kept (padded)
        let half = AudioClip::new(vec![0.1; 250], 100, "h");
        assert_eq!(segment(&half, 5.0).unwrap().len(), 1);
    }
}
