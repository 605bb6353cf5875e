//! Mono audio buffers, WAV I/O and framing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Internal processing rate. 40 ms at this rate is 640 samples.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

/// Mono sample buffer. Samples are nominally in `[-1, 1]` and always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip<T> {
    samples: Vec<T>,
    sample_rate: u32,
    source_id: String,
}

impl<T: Real> AudioClip<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
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

    pub fn energy(&self) -> T {
        self.samples.iter().map(|&s| s * s).sum()
    }

    /// Linear-interpolation resampling. Returns a clone when the rate already matches.
    pub fn resample(&self, target_rate: u32) -> Result<Self> {
        if target_rate == 0 {
            return Err(Error::InvalidArgument("target sample rate must be positive".into()));
        }
        if target_rate == self.sample_rate || self.samples.is_empty() {
            return Ok(Self {
                samples: self.samples.clone(),
                sample_rate: target_rate,
                source_id: self.source_id.clone(),
            });
        }
        let ratio = self.sample_rate as f64 / target_rate as f64;
        let out_len = ((self.samples.len() as f64) / ratio).floor() as usize;
        let last = self.samples.len() - 1;
        let samples = (0..out_len)
            .map(|i| {
                let pos = i as f64 * ratio;
                let i0 = (pos.floor() as usize).min(last);
                let i1 = (i0 + 1).min(last);
                let frac = T::lit(pos - i0 as f64);
                self.samples[i0] + (self.samples[i1] - self.samples[i0]) * frac
            })
            .collect();
        Ok(Self {
            samples,
            sample_rate: target_rate,
            source_id: self.source_id.clone(),
        })
    }
}

/// Reads a RIFF/WAVE file with 16-bit PCM, downmixing stereo by channel mean.
pub fn load_wav<T: Real>(path: impl AsRef<Path>) -> Result<AudioClip<T>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedEncoding(format!(
            "{}: {:?} {}-bit (only 16-bit PCM is supported)",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    if channels != 1 && channels != 2 {
        return Err(Error::UnsupportedEncoding(format!(
            "{}: {channels} channels (mono or stereo only)",
            path.display()
        )));
    }
    let raw = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_error(path, e))?;
    let scale = T::lit(1.0 / 32768.0);
    let samples = if channels == 1 {
        raw.iter().map(|&v| T::lit(v as f64) * scale).collect()
    } else {
        let half = T::lit(0.5);
        raw.chunks_exact(2)
            .map(|lr| (T::lit(lr[0] as f64) * scale + T::lit(lr[1] as f64) * scale) * half)
            .collect()
    };
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    AudioClip::new(samples, spec.sample_rate, id)
}

/// Writes a mono 16-bit PCM WAV; samples are clipped to `[-1, 1)`.
pub fn write_wav<T: Real>(clip: &AudioClip<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in clip.samples() {
        let v = (s.as_f64() * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => {
            Error::UnsupportedEncoding(format!("{}: unsupported wave format", path.display()))
        }
        hound::Error::FormatError(msg) => Error::Wav(format!("{}: {msg}", path.display())),
        other => Error::Wav(format!("{}: {other}", path.display())),
    }
}

/// Regular analysis grid over a signal. Frame `i` covers samples `[i*hop, i*hop + frame_len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameGrid {
    frame_len: usize,
    hop: usize,
    n_frames: usize,
    sample_rate: u32,
}

impl FrameGrid {
    pub fn new(frame_len: usize, hop: usize, n_frames: usize, sample_rate: u32) -> Result<Self> {
        if hop == 0 || hop > frame_len {
            return Err(Error::InvalidArgument(format!(
                "hop must satisfy 0 < hop <= frame_len (hop {hop}, frame_len {frame_len})"
            )));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        Ok(Self {
            frame_len,
            hop,
            n_frames,
            sample_rate,
        })
    }

    /// Grid for a signal of `n_samples`; the trailing remainder is dropped.
    pub fn for_length(
        n_samples: usize,
        frame_len: usize,
        hop: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        if n_samples < frame_len {
            return Err(Error::TooShort(format!(
                "{n_samples} samples is shorter than one frame of {frame_len}"
            )));
        }
        Self::new(frame_len, hop, (n_samples - frame_len) / hop + 1, sample_rate)
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame_start(&self, i: usize) -> usize {
        i * self.hop
    }

    /// Time of the frame centre in seconds.
    pub fn center_seconds(&self, i: usize) -> f64 {
        (i * self.hop) as f64 / self.sample_rate as f64
            + self.frame_len as f64 / (2.0 * self.sample_rate as f64)
    }

    /// Number of samples spanned by all frames.
    pub fn covered_len(&self) -> usize {
        if self.n_frames == 0 {
            0
        } else {
            (self.n_frames - 1) * self.hop + self.frame_len
        }
    }

    pub fn with_n_frames(&self, n_frames: usize) -> Self {
        Self { n_frames, ..*self }
    }
}

pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Frames `clip` with the given frame and hop durations in milliseconds.
pub fn frame_signal<T: Real>(clip: &AudioClip<T>, frame_ms: f64, hop_ms: f64) -> Result<FrameGrid> {
    if !(frame_ms > 0.0 && hop_ms > 0.0) {
        return Err(Error::InvalidArgument("frame and hop durations must be positive".into()));
    }
    let frame_len = ms_to_samples(frame_ms, clip.sample_rate());
    let hop = ms_to_samples(hop_ms, clip.sample_rate());
    if hop == 0 || hop > frame_len {
        return Err(Error::InvalidArgument(format!(
            "hop {hop_ms} ms must be positive and no longer than frame {frame_ms} ms"
        )));
    }
    FrameGrid::for_length(clip.len(), frame_len, hop, clip.sample_rate())
}
