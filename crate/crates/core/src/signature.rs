//! EMFD histogram, EMFD-KDE and MFD-VL signatures, plus their versioned
//! JSON container.

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::audio::Signal;
use crate::baseline::{BaselineFeature, BaselineKind, FrameSpec};
use crate::error::{Error, Result};
use crate::fractal::{self, PaddedSignal, EMFD_RBINS, MFDVL_LEN};

/// Number of fractal-dimension bins covering `[1, 2)`.
pub const DBINS: usize = 32;
/// Analysis window period for the EMFD family.
pub const WINDOW_MS: f64 = 50.0;
/// Default KDE smoothing constant.
pub const DEFAULT_ALPHA: f64 = 32.0;
/// Bandwidth floor used when the per-rbin spread collapses.
pub const BANDWIDTH_FLOOR: f64 = 1e-6;
/// Signature container version understood by this build.
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmfdKind {
    Histogram,
    Kde,
}

/// 16 x 32 matrix indexed `[rbin][dbin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmfdSignature {
    pub kind: EmfdKind,
    pub values: Vec<[f64; DBINS]>,
    pub window_ms: f64,
    /// Smoothing constant (KDE only).
    pub alpha: Option<f64>,
}

impl EmfdSignature {
    /// Row-major (rbin-major) flattening into 512 values.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flat_map(|row| row.iter().copied()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != EMFD_RBINS {
            return Err(Error::Invariant(format!(
                "EMFD has {} rbins, expected {EMFD_RBINS}",
                self.values.len()
            )));
        }
        match self.kind {
            EmfdKind::Histogram => {
                for (b, row) in self.values.iter().enumerate() {
                    if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                        return Err(Error::Invariant(format!("rbin {b} has a cell outside [0, 1]")));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::Invariant(format!("rbin {b} sums to {sum}, not 1")));
                    }
                }
            }
            EmfdKind::Kde => {
                if self.values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Invariant("KDE cells must be finite and >= 0".into()));
                }
                if !self.alpha.is_some_and(|a| a > 0.0 && a.is_finite()) {
                    return Err(Error::Invariant("KDE signature needs alpha > 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Ten very-long-range fractal-dimension values.
#[derive(Debug, Clone, PartialEq)]
pub struct MfdVlSignature {
    pub values: [f64; MFDVL_LEN],
    pub sample_rate: u32,
}

/// Per-rbin KDE bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    pub h: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub naw: usize,
}

/// Enhanced MFD of every 50 ms window, `[window][rbin]`.
pub fn window_profiles(signal: &Signal) -> Result<Vec<[f64; EMFD_RBINS]>> {
    let starts = fractal::analysis_windows(signal, WINDOW_MS)?;
    let len = fractal::period_samples(signal.sample_rate(), WINDOW_MS);
    let ladder = fractal::emfd_ladder();
    let pad = *ladder.radii().last().expect("non-empty ladder");
    let padded = PaddedSignal::new(signal.samples(), pad);
    Ok(starts
        .par_iter()
        .map(|&start| {
            let profile = fractal::enhanced_mfd_padded(&padded, start, len, &ladder);
            let mut row = [0.0; EMFD_RBINS];
            row.copy_from_slice(&profile.values);
            row
        })
        .collect())
}

/// dbin index (0-based) of a fractal-dimension value; out-of-range values
/// clamp into the boundary bins.
pub fn dbin_of(value: f64) -> usize {
    let d = ((value - 1.0) * DBINS as f64).floor();
    if d.is_nan() || d < 0.0 {
        0
    } else {
        (d as usize).min(DBINS - 1)
    }
}

/// Histogram of per-window enhanced MFD values.
pub fn emfd_from_profiles(profiles: &[[f64; EMFD_RBINS]]) -> EmfdSignature {
    let naw = profiles.len() as f64;
    let mut values = vec![[0.0; DBINS]; EMFD_RBINS];
    for window in profiles {
        for (row, &v) in values.iter_mut().zip(window) {
            row[dbin_of(v)] += 1.0;
        }
    }
    values.iter_mut().flatten().for_each(|c| *c /= naw);
    EmfdSignature {
        kind: EmfdKind::Histogram,
        values,
        window_ms: WINDOW_MS,
        alpha: None,
    }
}

pub fn emfd(signal: &Signal) -> Result<EmfdSignature> {
    Ok(emfd_from_profiles(&window_profiles(signal)?))
}

/// Normal-reference bandwidth `1.06 sigma n^(-1/5)`.
pub fn bandwidth_scott(sigma: f64, n: usize) -> f64 {
    1.06 * sigma * (n as f64).powf(-0.2)
}

/// Scott bandwidth of one rbin's window values (population sigma), scaled by
/// `alpha`, floored at [`BANDWIDTH_FLOOR`].
pub fn bandwidth_rbin(values: &[f64], alpha: f64) -> Result<Bandwidth> {
    if values.is_empty() {
        return Err(Error::param("values", "empty sample set"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("{alpha} must be > 0")));
    }
    let naw = values.len();
    let n = naw as f64;
    let avg = values.iter().sum::<f64>() / n;
    let sigma = (values.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / n).sqrt();
    let h = if sigma < BANDWIDTH_FLOOR {
        BANDWIDTH_FLOOR
    } else {
        bandwidth_scott(sigma, naw) * alpha
    };
    Ok(Bandwidth { h, alpha, sigma, naw })
}

/// Standard normal density.
pub fn gaussian_kernel(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Evaluation point of a 1-based dbin: `1 + (dbin - 0.5) / 32`.
pub fn dbin_midpoint(dbin: usize) -> f64 {
    1.0 + (dbin as f64 - 0.5) / DBINS as f64
}

/// Gaussian KDE of `samples` with bandwidth `h`, evaluated at `x`.
pub fn kde_at(samples: &[f64], h: f64, x: f64) -> f64 {
    let sum: f64 = samples.iter().map(|m| gaussian_kernel((x - m) / h)).sum();
    sum / (samples.len() as f64 * h)
}

pub fn emfd_kde_from_profiles(profiles: &[[f64; EMFD_RBINS]], alpha: f64) -> Result<EmfdSignature> {
    let mut values = vec![[0.0; DBINS]; EMFD_RBINS];
    for (rbin, row) in values.iter_mut().enumerate() {
        let samples: Vec<f64> = profiles.iter().map(|w| w[rbin]).collect();
        let bw = bandwidth_rbin(&samples, alpha)?;
        for (d, cell) in row.iter_mut().enumerate() {
            *cell = kde_at(&samples, bw.h, dbin_midpoint(d + 1));
        }
    }
    Ok(EmfdSignature {
        kind: EmfdKind::Kde,
        values,
        window_ms: WINDOW_MS,
        alpha: Some(alpha),
    })
}

pub fn emfd_kde(signal: &Signal, alpha: f64) -> Result<EmfdSignature> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("{alpha} must be > 0")));
    }
    emfd_kde_from_profiles(&window_profiles(signal)?, alpha)
}

/// Repeats whole copies of the signal until it lasts strictly longer than
/// one second. Longer signals are returned unchanged.
pub fn tile_past_one_second(signal: &Signal) -> Result<Signal> {
    if signal.is_empty() {
        return Err(Error::TooShort { samples: 0, needed: 1 });
    }
    let one_second = signal.sample_rate() as usize;
    if signal.len() > one_second {
        return Ok(signal.clone());
    }
    let copies = one_second / signal.len() + 1;
    let tiled = signal.samples().repeat(copies);
    Signal::new(tiled, signal.sample_rate())
}

pub fn mfdvl(signal: &Signal) -> Result<MfdVlSignature> {
    let tiled = tile_past_one_second(signal)?;
    let profile = fractal::mfdvl_profile(&tiled)?;
    let mut values = [0.0; MFDVL_LEN];
    values.copy_from_slice(&profile.values);
    Ok(MfdVlSignature {
        values,
        sample_rate: signal.sample_rate(),
    })
}

/// Any signature or baseline feature that can be stored in a signature file.
#[derive(Debug, Clone, PartialEq)]
pub enum SignatureRecord {
    Emfd(EmfdSignature),
    MfdVl(MfdVlSignature),
    Baseline(BaselineFeature),
}

impl SignatureRecord {
    pub fn feature_name(&self) -> &'static str {
        match self {
            SignatureRecord::Emfd(s) => match s.kind {
                EmfdKind::Histogram => "emfd",
                EmfdKind::Kde => "emfd-kde",
            },
            SignatureRecord::MfdVl(_) => "mfd-vl",
            SignatureRecord::Baseline(b) => b.kind.name(),
        }
    }

    /// Flat feature vector.
    pub fn values(&self) -> Vec<f64> {
        match self {
            SignatureRecord::Emfd(s) => s.flatten(),
            SignatureRecord::MfdVl(s) => s.values.to_vec(),
            SignatureRecord::Baseline(b) => b.values.clone(),
        }
    }

    fn params(&self) -> Value {
        match self {
            SignatureRecord::Emfd(s) => match s.alpha {
                Some(alpha) => json!({ "window_ms": s.window_ms, "alpha": alpha }),
                None => json!({ "window_ms": s.window_ms }),
            },
            SignatureRecord::MfdVl(s) => json!({ "sample_rate": s.sample_rate }),
            SignatureRecord::Baseline(b) => serde_json::to_value(b.spec).expect("frame spec serializes"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SignatureRecord::Emfd(s) => s.validate(),
            SignatureRecord::MfdVl(s) => {
                if s.values.iter().all(|v| v.is_finite()) && s.sample_rate > 0 {
                    Ok(())
                } else {
                    Err(Error::Invariant("MFD-VL values must be finite".into()))
                }
            }
            SignatureRecord::Baseline(b) => {
                b.spec.validate()?;
                let dim = b.kind.dim(&b.spec);
                if b.values.len() != dim {
                    return Err(Error::Invariant(format!(
                        "{} has {} values, expected {dim}",
                        b.kind.name(),
                        b.values.len()
                    )));
                }
                if b.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Invariant("feature values must be finite".into()));
                }
                Ok(())
            }
        }
    }
}

/// Serializes to the versioned JSON container
/// `{format_version, feature, params, values}`.
pub fn serialize_signature(record: &SignatureRecord) -> Result<Vec<u8>> {
    record.validate()?;
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "feature": record.feature_name(),
        "params": record.params(),
        "values": record.values(),
    });
    let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| Error::malformed("signature", e))?;
    out.push(b'\n');
    Ok(out)
}

fn param_f64(params: &Map<String, Value>, name: &'static str) -> Result<f64> {
    params
        .get(name)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::malformed("signature", format!("params.{name} missing or not a number")))
}

pub fn deserialize_signature(bytes: &[u8]) -> Result<SignatureRecord> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| Error::malformed("signature", e))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::malformed("signature", "top level is not an object"))?;
    let version = obj
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::malformed("signature", "format_version missing"))?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: vec![FORMAT_VERSION],
        });
    }
    let feature = obj
        .get("feature")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::malformed("signature", "feature missing"))?;
    let empty = Map::new();
    let params = obj.get("params").and_then(Value::as_object).unwrap_or(&empty);
    let values: Vec<f64> = obj
        .get("values")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::malformed("signature", "values missing"))?
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| Error::malformed("signature", "non-numeric value"))
        })
        .collect::<Result<_>>()?;

    let record = match feature {
        "emfd" | "emfd-kde" => {
            if values.len() != EMFD_RBINS * DBINS {
                return Err(Error::Invariant(format!(
                    "{feature} needs {} values, found {}",
                    EMFD_RBINS * DBINS,
                    values.len()
                )));
            }
            let rows = values
                .chunks_exact(DBINS)
                .map(|c| {
                    let mut row = [0.0; DBINS];
                    row.copy_from_slice(c);
                    row
                })
                .collect();
            let kde = feature == "emfd-kde";
            SignatureRecord::Emfd(EmfdSignature {
                kind: if kde { EmfdKind::Kde } else { EmfdKind::Histogram },
                values: rows,
                window_ms: param_f64(params, "window_ms")?,
                alpha: if kde { Some(param_f64(params, "alpha")?) } else { None },
            })
        }
        "mfd-vl" => {
            let values: [f64; MFDVL_LEN] = values
                .as_slice()
                .try_into()
                .map_err(|_| Error::Invariant(format!("mfd-vl needs {MFDVL_LEN} values, found {}", values.len())))?;
            let rate = param_f64(params, "sample_rate")?;
            if !(rate >= 1.0 && rate <= f64::from(u32::MAX) && rate.fract() == 0.0) {
                return Err(Error::malformed(
                    "signature",
                    "params.sample_rate must be a positive integer",
                ));
            }
            SignatureRecord::MfdVl(MfdVlSignature {
                values,
                sample_rate: rate as u32,
            })
        }
        "mfcc13" | "mfcc39" | "logmel" => {
            let kind = match feature {
                "mfcc13" => BaselineKind::Mfcc13,
                "mfcc39" => BaselineKind::Mfcc39,
                _ => BaselineKind::LogMel,
            };
            let spec: FrameSpec =
                serde_json::from_value(Value::Object(params.clone())).map_err(|e| Error::malformed("signature", e))?;
            SignatureRecord::Baseline(BaselineFeature { kind, spec, values })
        }
        other => return Err(Error::malformed("signature", format!("unknown feature `{other}`"))),
    };
    record.validate()?;
    Ok(record)
}
