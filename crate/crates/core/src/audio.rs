//! PCM audio loading and peak normalization.
//!
//! Samples are kept on the 16-bit integer amplitude scale (stored as `f64`)
//! so that the vertical axis of the sausage geometry is measured in the same
//! integer units as the horizontal sample-count axis.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

/// Canonical analysis sample rate.
pub const CANONICAL_RATE: u32 = 44_100;
/// Full-scale amplitude of a 16-bit sample.
pub const FULL_SCALE: f64 = 32_767.0;
/// Default peak target in dBFS.
pub const DEFAULT_PEAK_DB: f64 = -0.1;

const MIN_SAMPLE: f64 = -32_768.0;
const MAX_SAMPLE: f64 = 32_767.0;

/// Mono PCM sample sequence on the 16-bit amplitude scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::param("sample_rate", "must be > 0"));
        }
        if let Some((i, v)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < MIN_SAMPLE || **v > MAX_SAMPLE)
        {
            return Err(Error::Invariant(format!(
                "sample {i} = {v} outside the 16-bit range [-32768, 32767]"
            )));
        }
        Ok(Signal { samples, sample_rate })
    }

    /// Builds a signal, clamping every sample into the 16-bit range.
    /// Non-finite samples become zero.
    pub fn from_clamped(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let samples = samples
            .into_iter()
            .map(|v| {
                if v.is_finite() {
                    v.clamp(MIN_SAMPLE, MAX_SAMPLE)
                } else {
                    0.0
                }
            })
            .collect();
        Signal::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn duration_seconds(&self) -> f64 {
        duration_seconds(self)
    }
}

pub fn duration_seconds(signal: &Signal) -> f64 {
    signal.samples.len() as f64 / f64::from(signal.sample_rate)
}

/// Peak amplitude corresponding to `target_db` dBFS.
pub fn peak_target(target_db: f64) -> f64 {
    FULL_SCALE * 10f64.powf(target_db / 20.0)
}

/// Scales the signal by a single global factor so that its peak equals
/// `32767 * 10^(target_db / 20)`.
pub fn normalize_peak(signal: &Signal, target_db: f64) -> Result<Signal> {
    if !target_db.is_finite() || target_db > 0.0 {
        return Err(Error::param(
            "target_db",
            format!("{target_db} must be finite and <= 0 dBFS"),
        ));
    }
    let peak = signal.peak();
    if peak == 0.0 {
        return Err(Error::Silent);
    }
    let factor = peak_target(target_db) / peak;
    let samples = signal.samples.iter().map(|v| v * factor).collect();
    Signal::from_clamped(samples, signal.sample_rate)
}

/// How strictly a WAV file must match the canonical format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// Input must already be mono, 44100 Hz, 16-bit integer PCM.
    Strict,
    /// Downmix, resample and rescale as needed.
    #[default]
    Convert,
}

impl std::str::FromStr for LoadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(LoadMode::Strict),
            "convert" => Ok(LoadMode::Convert),
            other => Err(Error::param("mode", format!("`{other}` is not strict|convert"))),
        }
    }
}

pub fn load_wav(path: impl AsRef<Path>, mode: LoadMode) -> Result<Signal> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes, mode)
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::Unsupported => Error::UnsupportedCodec("non-PCM or unsupported WAVE encoding".into()),
        hound::Error::FormatError(msg) => Error::Wav(msg.to_string()),
        hound::Error::IoError(e) => Error::Wav(e.to_string()),
        other => Error::Wav(other.to_string()),
    }
}

/// Decodes an in-memory RIFF/WAVE integer-PCM file.
pub fn decode_wav(bytes: &[u8], mode: LoadMode) -> Result<Signal> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::UnsupportedCodec("IEEE float PCM".into()));
    }
    if spec.channels == 0 || spec.sample_rate == 0 {
        return Err(Error::Wav(format!(
            "degenerate header: {} channel(s), {} Hz",
            spec.channels, spec.sample_rate
        )));
    }
    let canonical = spec.channels == 1 && spec.sample_rate == CANONICAL_RATE && spec.bits_per_sample == 16;
    if mode == LoadMode::Strict && !canonical {
        return Err(Error::StrictFormat {
            channels: spec.channels,
            sample_rate: spec.sample_rate,
            bits: spec.bits_per_sample,
        });
    }

    let scale = match spec.bits_per_sample {
        8 => 256.0,
        16 => 1.0,
        24 => 1.0 / 256.0,
        32 => 1.0 / 65_536.0,
        other => return Err(Error::UnsupportedCodec(format!("{other}-bit integer PCM"))),
    };
    // hound already recenters unsigned 8-bit samples around zero.
    let interleaved: Vec<f64> = reader
        .into_samples::<i32>()
        .map(|s| s.map(|v| f64::from(v) * scale).map_err(map_hound))
        .collect::<Result<_>>()?;

    let channels = usize::from(spec.channels);
    let mono: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };

    let mono = if spec.sample_rate == CANONICAL_RATE {
        mono
    } else {
        resample_linear(&mono, spec.sample_rate, CANONICAL_RATE)
    };
    Signal::from_clamped(mono, CANONICAL_RATE)
}

/// Linear-interpolation resampler; indices past the end replicate the last
/// sample.
pub fn resample_linear(samples: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if samples.is_empty() || from_rate == to_rate {
        return samples.to_vec();
    }
    let n_out =
        ((samples.len() as u128 * u128::from(to_rate) + u128::from(from_rate) / 2) / u128::from(from_rate)) as usize;
    let step = f64::from(from_rate) / f64::from(to_rate);
    let last = samples.len() - 1;
    (0..n_out.max(1))
        .map(|i| {
            let pos = i as f64 * step;
            let lo = (pos.floor() as usize).min(last);
            let hi = (lo + 1).min(last);
            let frac = pos - lo as f64;
            samples[lo] + (samples[hi] - samples[lo]) * frac
        })
        .collect()
}

/// Encodes a signal as mono 16-bit PCM WAV bytes (samples rounded).
pub fn encode_wav(signal: &Signal) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec).map_err(map_hound)?;
        for &v in &signal.samples {
            writer
                .write_sample(v.round().clamp(MIN_SAMPLE, MAX_SAMPLE) as i16)
                .map_err(map_hound)?;
        }
        writer.finalize().map_err(map_hound)?;
    }
    Ok(cursor.into_inner())
}

pub fn write_wav(signal: &Signal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_wav(signal)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
