//! Deterministic synthetic test signals: pink-noise-filtered beats and
//! pulses, granular cricket models and SNR mixtures.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::{peak_target, Signal, CANONICAL_RATE, DEFAULT_PEAK_DB};
use crate::error::{Error, Result};

/// Cut-off of the low-cut filter applied to pink noise.
pub const PINK_LOW_CUT_HZ: f64 = 40.0;
/// Default test-signal duration in seconds.
pub const DEFAULT_DURATION: f64 = 21.0;
/// Gate level between chirp groups of the second cricket model.
pub const CRICKET2_GATE_FLOOR: f64 = 0.05;

fn sample_count(duration: f64) -> Result<usize> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::param("duration", format!("{duration} must be > 0")));
    }
    Ok((duration * f64::from(CANONICAL_RATE)).round().max(1.0) as usize)
}

fn time(i: usize) -> f64 {
    i as f64 / f64::from(CANONICAL_RATE)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("{v} must be > 0")))
    }
}

/// Scales raw samples so their peak sits at `target_db` dBFS. Silent input
/// is returned unchanged.
fn to_signal(mut raw: Vec<f64>, target_db: f64) -> Result<Signal> {
    let peak = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let k = peak_target(target_db) / peak;
        raw.iter_mut().for_each(|v| *v *= k);
    }
    Signal::from_clamped(raw, CANONICAL_RATE)
}

fn biquad_highpass(input: &[f64], sample_rate: f64, fc: f64, q: f64) -> Vec<f64> {
    let w0 = 2.0 * PI * fc / sample_rate;
    let (sin, cos) = w0.sin_cos();
    let alpha = sin / (2.0 * q);
    let a0 = 1.0 + alpha;
    let b0 = (1.0 + cos) / 2.0 / a0;
    let b1 = -(1.0 + cos) / a0;
    let b2 = b0;
    let a1 = -2.0 * cos / a0;
    let a2 = (1.0 - alpha) / a0;
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    input
        .iter()
        .map(|&x| {
            let y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

/// Fourth-order Butterworth high-pass as two cascaded biquads.
pub fn low_cut_samples(samples: &[f64], sample_rate: u32, fc: f64) -> Result<Vec<f64>> {
    let sr = f64::from(sample_rate);
    if !(fc > 0.0 && fc < sr / 2.0) {
        return Err(Error::param("fc", format!("{fc} Hz must lie in (0, {})", sr / 2.0)));
    }
    // Butterworth pole pair Qs for order 4.
    let q1 = 1.0 / (2.0 * (PI / 8.0).cos());
    let q2 = 1.0 / (2.0 * (3.0 * PI / 8.0).cos());
    let stage = biquad_highpass(samples, sr, fc, q1);
    Ok(biquad_highpass(&stage, sr, fc, q2))
}

pub fn low_cut(signal: &Signal, fc: f64) -> Result<Signal> {
    let out = low_cut_samples(signal.samples(), signal.sample_rate(), fc)?;
    Signal::from_clamped(out, signal.sample_rate())
}

/// Raw 1/f noise of `n` samples: seeded white Gaussian noise shaped by
/// `1/sqrt(f)` in the frequency domain, DC removed. Unnormalized.
pub fn pink_noise_raw(n: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let bin_hz = f64::from(sample_rate) / n as f64;
    buf[0] = Complex::new(0.0, 0.0);
    for k in 1..n {
        let mirrored = k.min(n - k);
        buf[k] *= 1.0 / (mirrored as f64 * bin_hz).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Low-cut pink noise of `n` samples normalized to -0.1 dBFS.
pub fn pink_noise_samples(n: usize, seed: u64) -> Result<Signal> {
    let raw = pink_noise_raw(n, CANONICAL_RATE, seed);
    let cut = low_cut_samples(&raw, CANONICAL_RATE, PINK_LOW_CUT_HZ)?;
    to_signal(cut, DEFAULT_PEAK_DB)
}

pub fn pink_noise(duration: f64, seed: u64) -> Result<Signal> {
    pink_noise_samples(sample_count(duration)?, seed)
}

/// `15/16 * signal + 1/16 * pink noise` (noise of the same length, seeded).
pub fn pink_filter(signal: &Signal, seed: u64) -> Result<Signal> {
    if signal.is_empty() {
        return Err(Error::param("signal", "empty signal"));
    }
    let noise = pink_noise_samples(signal.len(), seed)?;
    let mixed = signal
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(s, n)| 15.0 / 16.0 * s + 1.0 / 16.0 * n)
        .collect();
    Signal::from_clamped(mixed, signal.sample_rate())
}

/// `cos(pi f_beat t) sin(2 pi f_content t)` at unit amplitude.
pub fn beat_waveform(f_beat: f64, f_content: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = time(i);
            (PI * f_beat * t).cos() * (2.0 * PI * f_content * t).sin()
        })
        .collect()
}

/// Rectangular gate: 1 while `t mod 1/f_pulse <= w_pulse/f_pulse`.
pub fn pulse_gate(f_pulse: f64, w_pulse: f64, t: f64) -> f64 {
    let period = 1.0 / f_pulse;
    if t.rem_euclid(period) <= w_pulse / f_pulse {
        1.0
    } else {
        0.0
    }
}

pub fn pulse_waveform(f_pulse: f64, w_pulse: f64, f_content: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = time(i);
            pulse_gate(f_pulse, w_pulse, t) * (2.0 * PI * f_content * t).sin()
        })
        .collect()
}

/// Hann window `(1 - cos(2 pi x)) / 2`.
pub fn hann(x: f64) -> f64 {
    0.5 * (1.0 - (2.0 * PI * x).cos())
}

/// Grain clock `min(t mod 1/f, 1/(1.1 f))`.
pub fn grain_time(t: f64, f: f64) -> f64 {
    t.rem_euclid(1.0 / f).min(1.0 / (1.1 * f))
}

pub fn cricket_sample(t: f64, f_c: f64, f_e: f64) -> f64 {
    (2.0 * PI * f_c * t).sin() * hann(1.1 * f_e * grain_time(t, f_e))
}

/// Chirp-group gate: 1 during the first `sn/f_e` of each `1/f_rep` period,
/// otherwise 0.05.
pub fn cricket_gate(f_e: f64, sn: u32, f_rep: f64, t: f64) -> f64 {
    if t.rem_euclid(1.0 / f_rep) <= f64::from(sn) / f_e {
        1.0
    } else {
        CRICKET2_GATE_FLOOR
    }
}

/// Hann-grain cricket model at unit amplitude (not normalized).
pub fn sim_cricket(f_c: f64, f_e: f64, duration: f64) -> Result<Signal> {
    positive("f_c", f_c)?;
    positive("f_e", f_e)?;
    let n = sample_count(duration)?;
    Signal::new(
        (0..n).map(|i| cricket_sample(time(i), f_c, f_e)).collect(),
        CANONICAL_RATE,
    )
}

/// Cricket model with repeated chirp groups, at unit amplitude.
pub fn sim_cricket2(f_c: f64, sn: u32, f_rep: f64, f_e: f64, duration: f64) -> Result<Signal> {
    positive("f_c", f_c)?;
    positive("f_rep", f_rep)?;
    positive("f_e", f_e)?;
    if sn < 1 {
        return Err(Error::param("sn", "chirp count must be >= 1"));
    }
    if f64::from(sn) / f_e > 1.0 / f_rep {
        return Err(Error::param(
            "sn",
            format!("{sn} chirps at {f_e} Hz do not fit in a 1/{f_rep} s repetition period"),
        ));
    }
    let n = sample_count(duration)?;
    let samples = (0..n)
        .map(|i| {
            let t = time(i);
            cricket_gate(f_e, sn, f_rep, t) * cricket_sample(t, f_c, f_e)
        })
        .collect();
    Signal::new(samples, CANONICAL_RATE)
}

/// Scales a unit-amplitude waveform to the peak target, applies the pink
/// filter and re-normalizes the result.
fn filtered(raw: Vec<f64>, seed: u64) -> Result<Signal> {
    let scaled = to_signal(raw, DEFAULT_PEAK_DB)?;
    let mixed = pink_filter(&scaled, seed)?;
    to_signal(mixed.into_samples(), DEFAULT_PEAK_DB)
}

/// Pink-filtered beat sine. `f_beat = 0` yields the plain filtered sine.
pub fn beat_sine(f_beat: f64, f_content: f64, duration: f64, seed: u64) -> Result<Signal> {
    if !(f_beat >= 0.0 && f_beat.is_finite()) {
        return Err(Error::param("f_beat", format!("{f_beat} must be >= 0")));
    }
    positive("f_content", f_content)?;
    filtered(beat_waveform(f_beat, f_content, sample_count(duration)?), seed)
}

pub fn pulse_sine(f_pulse: f64, w_pulse: f64, f_content: f64, duration: f64, seed: u64) -> Result<Signal> {
    positive("f_pulse", f_pulse)?;
    positive("f_content", f_content)?;
    if !(w_pulse > 0.0 && w_pulse <= 1.0) {
        return Err(Error::param("w_pulse", format!("{w_pulse} must lie in (0, 1]")));
    }
    filtered(
        pulse_waveform(f_pulse, w_pulse, f_content, sample_count(duration)?),
        seed,
    )
}

/// Pink-filtered, normalized first cricket model.
pub fn cricket_filtered(f_c: f64, f_e: f64, duration: f64, seed: u64) -> Result<Signal> {
    filtered(sim_cricket(f_c, f_e, duration)?.into_samples(), seed)
}

/// Pink-filtered, normalized second cricket model.
pub fn cricket2_filtered(f_c: f64, sn: u32, f_rep: f64, f_e: f64, duration: f64, seed: u64) -> Result<Signal> {
    filtered(sim_cricket2(f_c, sn, f_rep, f_e, duration)?.into_samples(), seed)
}

/// `beta * signal + (1 - beta) * noise`, elementwise.
pub fn mix_snr(signal: &Signal, noise: &Signal, beta: f64) -> Result<Signal> {
    if signal.len() != noise.len() || signal.sample_rate() != noise.sample_rate() {
        return Err(Error::LengthMismatch(format!(
            "signal {} samples @ {} Hz vs noise {} samples @ {} Hz",
            signal.len(),
            signal.sample_rate(),
            noise.len(),
            noise.sample_rate()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::param("beta", format!("{beta} must lie in [0, 1]")));
    }
    let mixed = signal
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(s, n)| beta * s + (1.0 - beta) * n)
        .collect();
    Signal::from_clamped(mixed, signal.sample_rate())
}

/// Noise-free reference of the noise-robustness set: the second cricket
/// model (5800 Hz, 3 chirps, 2.73 Hz, 30 Hz) normalized to -0.1 dBFS.
pub fn cricket2_reference(duration: f64) -> Result<Signal> {
    let raw = sim_cricket2(5800.0, 3, 2.73, 30.0, duration)?;
    to_signal(raw.into_samples(), DEFAULT_PEAK_DB)
}

/// Generator family of a synthetic signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    BeatSine,
    PulseSine,
    Cricket,
    Cricket2,
    PinkNoise,
    SnrMix,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "beat_sine" => SynthKind::BeatSine,
            "pulse_sine" => SynthKind::PulseSine,
            "cricket" => SynthKind::Cricket,
            "cricket2" => SynthKind::Cricket2,
            "pink_noise" => SynthKind::PinkNoise,
            "snr_mix" => SynthKind::SnrMix,
            other => return Err(Error::param("kind", format!("unknown synth kind `{other}`"))),
        })
    }
}

/// Fully parameterized, seed-deterministic description of one test signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub parameters: BTreeMap<String, f64>,
    pub duration: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, parameters: &[(&str, f64)], duration: f64, seed: u64) -> Self {
        SynthSpec {
            kind,
            parameters: parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            duration,
            seed,
        }
    }

    fn get(&self, name: &'static str) -> Result<f64> {
        self.parameters
            .get(name)
            .copied()
            .ok_or_else(|| Error::param(name, format!("required for {:?}", self.kind)))
    }

    fn get_or(&self, name: &'static str, default: f64) -> f64 {
        self.parameters.get(name).copied().unwrap_or(default)
    }

    fn sn(&self) -> Result<u32> {
        let sn = self.get_or("sn", 3.0);
        if sn >= 1.0 && sn.fract() == 0.0 && sn <= f64::from(u32::MAX) {
            Ok(sn as u32)
        } else {
            Err(Error::param("sn", format!("{sn} must be a positive integer")))
        }
    }

    /// Synthesizes the described signal.
    pub fn generate(&self) -> Result<Signal> {
        match self.kind {
            SynthKind::BeatSine => beat_sine(
                self.get("f_beat")?,
                self.get_or("f_content", 440.0),
                self.duration,
                self.seed,
            ),
            SynthKind::PulseSine => pulse_sine(
                self.get("f_pulse")?,
                self.get("w_pulse")?,
                self.get_or("f_content", 440.0),
                self.duration,
                self.seed,
            ),
            SynthKind::Cricket => {
                cricket_filtered(self.get("f_c")?, self.get_or("f_e", 30.0), self.duration, self.seed)
            }
            SynthKind::Cricket2 => cricket2_filtered(
                self.get("f_c")?,
                self.sn()?,
                self.get_or("f_rep", 2.73),
                self.get_or("f_e", 30.0),
                self.duration,
                self.seed,
            ),
            SynthKind::PinkNoise => pink_noise(self.duration, self.seed),
            SynthKind::SnrMix => {
                let beta = self.get("beta")?;
                let reference = sim_cricket2(
                    self.get_or("f_c", 5800.0),
                    self.sn()?,
                    self.get_or("f_rep", 2.73),
                    self.get_or("f_e", 30.0),
                    self.duration,
                )?;
                let reference = to_signal(reference.into_samples(), DEFAULT_PEAK_DB)?;
                let noise = pink_noise_samples(reference.len(), self.seed)?;
                let mixed = mix_snr(&reference, &noise, beta)?;
                to_signal(mixed.into_samples(), DEFAULT_PEAK_DB)
            }
        }
    }

    /// Human-readable label, e.g. `beat_sine(f_beat=2,f_content=440)`.
    pub fn label(&self) -> String {
        let kind = serde_json::to_value(self.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let params: Vec<String> = self.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{kind}({})", params.join(","))
    }
}

/// Named families of test signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestSet {
    /// Beat sines, `f_beat` in {0.5, 1, 2, 4, 8, 16, 32}, 440 Hz content.
    St1,
    /// Beat sines at 2 and 4 Hz plus half-duty pulses at 2 and 4 Hz.
    St2,
    /// 4 Hz pulses with widths 0.2, 0.5 and 0.8.
    St3,
    /// Both cricket models at carriers 5300, 5800 and 6300 Hz.
    St4,
    /// Second cricket model mixed with pink noise, beta in {0.67 .. 0.97}.
    St5,
}

impl std::str::FromStr for TestSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('_', "").as_str() {
            "sst1" => TestSet::St1,
            "sst2" => TestSet::St2,
            "sst3" => TestSet::St3,
            "sst4" => TestSet::St4,
            "sst5" => TestSet::St5,
            _ => return Err(Error::param("set", format!("unknown test set `{s}` (SS_t1..SS_t5)"))),
        })
    }
}

pub const ST1_BEATS: [f64; 7] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
pub const ST4_CARRIERS: [f64; 3] = [5300.0, 5800.0, 6300.0];
pub const ST5_BETAS: [f64; 5] = [0.67, 0.8, 0.89, 0.94, 0.97];

/// One generated member of a test set.
#[derive(Debug, Clone)]
pub struct SynthMember {
    pub label: String,
    pub spec: SynthSpec,
    pub signal: Signal,
}

impl TestSet {
    /// Parameterizations of every member, in set order.
    pub fn specs(self, duration: f64, seed: u64) -> Vec<SynthSpec> {
        use SynthKind::*;
        let beat = |f: f64| SynthSpec::new(BeatSine, &[("f_beat", f), ("f_content", 440.0)], duration, seed);
        let pulse = |f: f64, w: f64| {
            SynthSpec::new(
                PulseSine,
                &[("f_pulse", f), ("w_pulse", w), ("f_content", 440.0)],
                duration,
                seed,
            )
        };
        match self {
            TestSet::St1 => ST1_BEATS.iter().map(|&f| beat(f)).collect(),
            TestSet::St2 => vec![beat(2.0), beat(4.0), pulse(2.0, 0.5), pulse(4.0, 0.5)],
            TestSet::St3 => [0.2, 0.5, 0.8].iter().map(|&w| pulse(4.0, w)).collect(),
            TestSet::St4 => ST4_CARRIERS
                .iter()
                .map(|&f| SynthSpec::new(Cricket, &[("f_c", f), ("f_e", 30.0)], duration, seed))
                .chain(ST4_CARRIERS.iter().map(|&f| {
                    SynthSpec::new(
                        Cricket2,
                        &[("f_c", f), ("sn", 3.0), ("f_rep", 2.73), ("f_e", 30.0)],
                        duration,
                        seed,
                    )
                }))
                .collect(),
            TestSet::St5 => ST5_BETAS
                .iter()
                .map(|&b| {
                    SynthSpec::new(
                        SnrMix,
                        &[
                            ("beta", b),
                            ("f_c", 5800.0),
                            ("sn", 3.0),
                            ("f_rep", 2.73),
                            ("f_e", 30.0),
                        ],
                        duration,
                        seed,
                    )
                })
                .collect(),
        }
    }
}

pub fn test_set(set: TestSet, duration: f64, seed: u64) -> Result<Vec<SynthMember>> {
    set.specs(duration, seed)
        .into_iter()
        .map(|spec| {
            let signal = spec.generate()?;
            Ok(SynthMember {
                label: spec.label(),
                spec,
                signal,
            })
        })
        .collect()
}
