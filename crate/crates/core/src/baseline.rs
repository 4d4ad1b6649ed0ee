//! Frequency-domain reference features: MFCC13, MFCC39 and log-mel energies.
//!
//! Pre-emphasis, Hann window, magnitude spectrum, triangular filters on the
//! `2595 log10(1 + f/700)` mel scale, natural log with a 1e-10 floor and an
//! orthonormal DCT-II followed by a sinusoidal lifter. Defaults follow the
//! common SPTK front end (20 channels, lifter 22, pre-emphasis 0.97). Every
//! feature is the mean over frames.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::Signal;
use crate::error::{Error, Result};

/// Energies are clamped here before taking the log.
pub const LOG_FLOOR: f64 = 1e-10;
pub const N_MELS: usize = 20;
pub const LIFTER: usize = 22;
pub const PRE_EMPHASIS: f64 = 0.97;
/// Half-width of the delta regression window.
pub const DELTA_WIDTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub window_ms: f64,
    pub hop_ms: f64,
    /// FFT length; `None` picks the next power of two >= the window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fft_size: Option<usize>,
    pub n_mels: usize,
    pub n_ceps: usize,
    /// Sinusoidal cepstral lifter length; 0 disables liftering.
    #[serde(default)]
    pub lifter: usize,
    /// First-order pre-emphasis coefficient; 0 disables it.
    #[serde(default)]
    pub pre_emphasis: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec::exp1()
    }
}

impl FrameSpec {
    /// 50 ms windows, 50 ms hop.
    pub fn exp1() -> Self {
        FrameSpec {
            window_ms: 50.0,
            hop_ms: 50.0,
            fft_size: None,
            n_mels: N_MELS,
            n_ceps: 13,
            lifter: LIFTER,
            pre_emphasis: PRE_EMPHASIS,
        }
    }

    /// 50 ms windows every 25 ms.
    pub fn exp2() -> Self {
        FrameSpec {
            hop_ms: 25.0,
            ..FrameSpec::exp1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_ms > 0.0 && self.window_ms.is_finite()) {
            return Err(Error::param("window_ms", "must be > 0"));
        }
        if !(self.hop_ms > 0.0 && self.hop_ms <= self.window_ms) {
            return Err(Error::param("hop_ms", "must satisfy 0 < hop <= window"));
        }
        if self.n_mels == 0 {
            return Err(Error::param("n_mels", "must be >= 1"));
        }
        if self.n_ceps == 0 || self.n_ceps > self.n_mels {
            return Err(Error::param("n_ceps", "must satisfy 1 <= n_ceps <= n_mels"));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(Error::param("pre_emphasis", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn window_len(&self, sample_rate: u32) -> usize {
        ((self.window_ms * f64::from(sample_rate) / 1000.0).round() as usize).max(1)
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        ((self.hop_ms * f64::from(sample_rate) / 1000.0).round() as usize).max(1)
    }

    pub fn fft_len(&self, sample_rate: u32) -> Result<usize> {
        let win = self.window_len(sample_rate);
        match self.fft_size {
            None => Ok(win.next_power_of_two()),
            Some(n) if n >= win => Ok(n),
            Some(n) => Err(Error::param(
                "fft_size",
                format!("{n} is shorter than the {win}-sample window"),
            )),
        }
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Sparse triangular filters `(first_bin, weights)` spanning 0 Hz to Nyquist.
pub fn mel_filterbank(n_mels: usize, fft_len: usize, sample_rate: u32) -> Vec<(usize, Vec<f64>)> {
    let sr = f64::from(sample_rate);
    let top = hz_to_mel(sr / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let n_bins = fft_len / 2 + 1;
    let bin_hz = sr / fft_len as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let first = (lo / bin_hz).ceil() as usize;
            let weights = (first..n_bins)
                .map(|k| k as f64 * bin_hz)
                .take_while(|&f| f <= hi)
                .map(|f| {
                    if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                    .max(0.0)
                })
                .collect();
            (first, weights)
        })
        .collect()
}

/// Orthonormal DCT-II of `x`, first `n_out` coefficients.
pub fn dct2(x: &[f64], n_out: usize) -> Vec<f64> {
    let m = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * k as f64 * (i as f64 + 0.5) / m).cos())
                    .sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Spectrum {
    Magnitude,
    /// `|X|^2 / n_fft`, stable under zero padding.
    Power,
}

struct Analyzer {
    window: Vec<f64>,
    hop: usize,
    fft: Arc<dyn Fft<f64>>,
    fft_len: usize,
    filters: Vec<(usize, Vec<f64>)>,
}

impl Analyzer {
    fn new(spec: &FrameSpec, sample_rate: u32) -> Result<Self> {
        spec.validate()?;
        let win = spec.window_len(sample_rate);
        let fft_len = spec.fft_len(sample_rate)?;
        let window = (0..win)
            .map(|i| {
                if win == 1 {
                    1.0
                } else {
                    0.5 * (1.0 - (2.0 * PI * i as f64 / (win - 1) as f64).cos())
                }
            })
            .collect();
        Ok(Analyzer {
            window,
            hop: spec.hop_len(sample_rate),
            fft: FftPlanner::new().plan_fft_forward(fft_len),
            fft_len,
            filters: mel_filterbank(spec.n_mels, fft_len, sample_rate),
        })
    }

    fn frame_starts(&self, len: usize) -> Result<Vec<usize>> {
        let win = self.window.len();
        if len < win {
            return Err(Error::TooShort {
                samples: len,
                needed: win,
            });
        }
        Ok((0..=(len - win) / self.hop).map(|i| i * self.hop).collect())
    }

    /// Log mel energies of every frame.
    fn log_mel_frames(&self, samples: &[f64], kind: Spectrum) -> Result<Vec<Vec<f64>>> {
        let starts = self.frame_starts(samples.len())?;
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut spectrum = vec![0.0; self.fft_len / 2 + 1];
        let mut frames = Vec::with_capacity(starts.len());
        for start in starts {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (i, w) in self.window.iter().enumerate() {
                buf[i] = Complex::new(samples[start + i] * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (s, c) in spectrum.iter_mut().zip(&buf) {
                *s = match kind {
                    Spectrum::Magnitude => c.norm(),
                    Spectrum::Power => c.norm_sqr() / self.fft_len as f64,
                };
            }
            frames.push(
                self.filters
                    .iter()
                    .map(|(first, weights)| {
                        let e: f64 = weights.iter().zip(&spectrum[*first..]).map(|(w, s)| w * s).sum();
                        e.max(LOG_FLOOR).ln()
                    })
                    .collect(),
            );
        }
        Ok(frames)
    }
}

fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let width = rows.first().map_or(0, Vec::len);
    (0..width).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// `y[n] = x[n] - a x[n-1]`, with `x[-1] = x[0]`.
pub fn pre_emphasize(samples: &[f64], a: f64) -> Vec<f64> {
    let mut prev = samples.first().copied().unwrap_or(0.0);
    samples
        .iter()
        .map(|&x| {
            let y = x - a * prev;
            prev = x;
            y
        })
        .collect()
}

/// Sinusoidal lifter weights `1 + (L/2) sin(pi k / L)`.
pub fn lifter_weights(n_ceps: usize, lifter: usize) -> Vec<f64> {
    (0..n_ceps)
        .map(|k| {
            if lifter == 0 {
                1.0
            } else {
                let l = lifter as f64;
                1.0 + l / 2.0 * (PI * k as f64 / l).sin()
            }
        })
        .collect()
}

/// Per-frame cepstra: first `n_ceps` DCT coefficients of log mel
/// magnitudes, liftered.
pub fn cepstra(signal: &Signal, spec: &FrameSpec) -> Result<Vec<Vec<f64>>> {
    let analyzer = Analyzer::new(spec, signal.sample_rate())?;
    let samples = if spec.pre_emphasis > 0.0 {
        pre_emphasize(signal.samples(), spec.pre_emphasis)
    } else {
        signal.samples().to_vec()
    };
    let weights = lifter_weights(spec.n_ceps, spec.lifter);
    Ok(analyzer
        .log_mel_frames(&samples, Spectrum::Magnitude)?
        .iter()
        .map(|frame| {
            dct2(frame, spec.n_ceps)
                .into_iter()
                .zip(&weights)
                .map(|(c, w)| c * w)
                .collect()
        })
        .collect())
}

/// Regression deltas over `±DELTA_WIDTH` frames with edge replication.
pub fn deltas(frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = frames.len();
    if n == 0 {
        return Vec::new();
    }
    let width = frames[0].len();
    let denom = 2.0 * (1..=DELTA_WIDTH).map(|k| (k * k) as f64).sum::<f64>();
    (0..n)
        .map(|t| {
            (0..width)
                .map(|j| {
                    (1..=DELTA_WIDTH)
                        .map(|k| {
                            let ahead = &frames[(t + k).min(n - 1)];
                            let behind = &frames[t.saturating_sub(k)];
                            k as f64 * (ahead[j] - behind[j])
                        })
                        .sum::<f64>()
                        / denom
                })
                .collect()
        })
        .collect()
}

/// Mean of the first `n_ceps` (13 by default) MFCCs over all frames.
pub fn mfcc13(signal: &Signal, spec: &FrameSpec) -> Result<Vec<f64>> {
    Ok(column_means(&cepstra(signal, spec)?))
}

/// MFCC means followed by mean deltas and mean delta-deltas.
pub fn mfcc39(signal: &Signal, spec: &FrameSpec) -> Result<Vec<f64>> {
    let frames = cepstra(signal, spec)?;
    let needed = 2 * DELTA_WIDTH + 1;
    if frames.len() < needed {
        return Err(Error::Undefined(format!(
            "delta-delta needs at least {needed} frames, signal yields {}",
            frames.len()
        )));
    }
    let d1 = deltas(&frames);
    let d2 = deltas(&d1);
    let mut out = column_means(&frames);
    out.extend(column_means(&d1));
    out.extend(column_means(&d2));
    Ok(out)
}

/// Mean log mel-band energies (power spectrum).
pub fn log_mel(signal: &Signal, spec: &FrameSpec) -> Result<Vec<f64>> {
    let analyzer = Analyzer::new(spec, signal.sample_rate())?;
    Ok(column_means(
        &analyzer.log_mel_frames(signal.samples(), Spectrum::Power)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(rename = "mfcc13")]
    Mfcc13,
    #[serde(rename = "mfcc39")]
    Mfcc39,
    #[serde(rename = "logmel")]
    LogMel,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Mfcc13 => "mfcc13",
            BaselineKind::Mfcc39 => "mfcc39",
            BaselineKind::LogMel => "logmel",
        }
    }

    pub fn dim(self, spec: &FrameSpec) -> usize {
        match self {
            BaselineKind::Mfcc13 => spec.n_ceps,
            BaselineKind::Mfcc39 => 3 * spec.n_ceps,
            BaselineKind::LogMel => spec.n_mels,
        }
    }
}

/// A baseline feature vector with the frame parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineFeature {
    pub kind: BaselineKind,
    pub spec: FrameSpec,
    pub values: Vec<f64>,
}

pub fn extract(kind: BaselineKind, signal: &Signal, spec: &FrameSpec) -> Result<BaselineFeature> {
    let values = match kind {
        BaselineKind::Mfcc13 => mfcc13(signal, spec)?,
        BaselineKind::Mfcc39 => mfcc39(signal, spec)?,
        BaselineKind::LogMel => log_mel(signal, spec)?,
    };
    Ok(BaselineFeature {
        kind,
        spec: *spec,
        values,
    })
}
