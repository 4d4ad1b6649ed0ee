//! Minkowski-sausage extents and multiscale fractal-dimension profiles.
//!
//! The sausage swept by a unit figure along the waveform is measured as the
//! sum, over sampling positions, of its vertical extent at that position.
//! Sample lookups outside the signal replicate the nearest boundary sample.

use std::collections::VecDeque;

use crate::audio::Signal;
use crate::error::{Error, Result};

/// Unit figure swept along the waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Disk,
    Square,
}

/// Mesh approximation of a disk of radius `r`: `offsets[i] = floor(sqrt(2ri - i^2))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiskProfile {
    radius: usize,
    offsets: Vec<u64>,
}

impl DiskProfile {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }
}

pub fn disk_profile(r: usize) -> Result<DiskProfile> {
    if r < 1 {
        return Err(Error::param("r", "disk radius must be >= 1"));
    }
    let r64 = r as u64;
    let offsets = (0..=2 * r64).map(|i| (2 * r64 * i - i * i).isqrt()).collect();
    Ok(DiskProfile { radius: r, offsets })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderPurpose {
    Emfd,
    MfdVl,
}

/// Strictly increasing (EMFD) or strictly decreasing (MFD-VL) radii whose
/// consecutive pairs define the scales of a profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadiiLadder {
    radii: Vec<usize>,
    purpose: LadderPurpose,
}

impl RadiiLadder {
    pub fn radii(&self) -> &[usize] {
        &self.radii
    }

    pub fn purpose(&self) -> LadderPurpose {
        self.purpose
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.radii.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Number of radius pairs (rbins) in the enhanced MFD.
pub const EMFD_RBINS: usize = 16;
/// Number of values in the very-long-range profile.
pub const MFDVL_LEN: usize = 10;
/// Largest radius of the base MFD (the profile uses radii 1..=133).
pub const BASE_MFD_LEN: usize = 132;

/// `round(1.4^i)` for `i = 1..=17`.
pub fn emfd_ladder() -> RadiiLadder {
    let radii = (1..=EMFD_RBINS as i32 + 1)
        .map(|i| 1.4f64.powi(i).round() as usize)
        .collect();
    RadiiLadder {
        radii,
        purpose: LadderPurpose::Emfd,
    }
}

/// Half side-lengths `round(sf * 2^(-(x+2)/2))` for `x = 0..=10`.
pub fn mfdvl_radii(sample_rate: u32) -> Result<RadiiLadder> {
    if sample_rate == 0 {
        return Err(Error::param("sample_rate", "must be > 0"));
    }
    let sf = f64::from(sample_rate);
    let radii: Vec<usize> = (0..=MFDVL_LEN)
        .map(|x| (sf * 2f64.powf(-(x as f64 + 2.0) / 2.0)).round() as usize)
        .collect();
    if radii.last() == Some(&0) || radii.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::param(
            "sample_rate",
            format!("{sample_rate} Hz is too low for distinct very-long-range radii"),
        ));
    }
    Ok(RadiiLadder {
        radii,
        purpose: LadderPurpose::MfdVl,
    })
}

/// Fractal-dimension values over a ladder of radius pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MfdProfile {
    pub values: Vec<f64>,
    pub scale_axis: Vec<(usize, usize)>,
}

/// `2 - log(A(b)/A(a)) / log(b/a)` for the radius pair `(a, b)`.
pub fn dimension_from_areas(area_a: f64, area_b: f64, ra: usize, rb: usize) -> f64 {
    2.0 - (area_b / area_a).ln() / (rb as f64 / ra as f64).ln()
}

/// Signal copy with `pad` replicated boundary samples on each side.
#[derive(Debug, Clone)]
pub struct PaddedSignal {
    data: Vec<f64>,
    pad: usize,
    len: usize,
}

impl PaddedSignal {
    pub fn new(samples: &[f64], pad: usize) -> Self {
        let len = samples.len();
        let mut data = Vec::with_capacity(len + 2 * pad);
        if let (Some(&first), Some(&last)) = (samples.first(), samples.last()) {
            data.extend(std::iter::repeat_n(first, pad));
            data.extend_from_slice(samples);
            data.extend(std::iter::repeat_n(last, pad));
        }
        PaddedSignal { data, pad, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Disk-sausage area over positions `start..start + len`.
    pub fn disk_area(&self, start: usize, len: usize, profile: &DiskProfile) -> f64 {
        let r = profile.radius;
        assert!(r <= self.pad, "radius {r} exceeds padding {}", self.pad);
        assert!(start + len <= self.len);
        let caps: Vec<f64> = profile.offsets.iter().map(|&c| c as f64).collect();
        let mut area = 0.0;
        for n in start..start + len {
            // padded index of sig(n - r) is n - r + pad
            let window = &self.data[n + self.pad - r..=n + self.pad + r];
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for (&x, &c) in window.iter().zip(&caps) {
                let up = x + c;
                let down = x - c;
                hi = if up > hi { up } else { hi };
                lo = if down < lo { down } else { lo };
            }
            area += hi - lo;
        }
        area
    }

    /// Square-sausage area over positions `start..start + len`.
    pub fn square_area(&self, start: usize, len: usize, r: usize) -> f64 {
        assert!(r <= self.pad, "radius {r} exceeds padding {}", self.pad);
        assert!(start + len <= self.len);
        let lo = start + self.pad - r;
        let hi = start + len + self.pad + r;
        let (maxs, mins) = sliding_extrema(&self.data[lo..hi], 2 * r + 1);
        let side = 2.0 * r as f64;
        maxs.iter()
            .zip(&mins)
            .fold(0.0, |acc, (mx, mn)| acc + ((mx - mn) + side))
    }
}

/// Running max and min over every full window of `width` consecutive values
/// (monotonic deques, O(n)).
pub fn sliding_extrema(values: &[f64], width: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(width >= 1);
    if values.len() < width {
        return (Vec::new(), Vec::new());
    }
    let out_len = values.len() - width + 1;
    let mut maxs = Vec::with_capacity(out_len);
    let mut mins = Vec::with_capacity(out_len);
    let mut max_q: VecDeque<usize> = VecDeque::with_capacity(width);
    let mut min_q: VecDeque<usize> = VecDeque::with_capacity(width);
    for (i, &v) in values.iter().enumerate() {
        while max_q.back().is_some_and(|&j| values[j] <= v) {
            max_q.pop_back();
        }
        max_q.push_back(i);
        while min_q.back().is_some_and(|&j| values[j] >= v) {
            min_q.pop_back();
        }
        min_q.push_back(i);
        if i + 1 >= width {
            let left = i + 1 - width;
            while max_q.front().is_some_and(|&j| j < left) {
                max_q.pop_front();
            }
            while min_q.front().is_some_and(|&j| j < left) {
                min_q.pop_front();
            }
            maxs.push(values[max_q[0]]);
            mins.push(values[min_q[0]]);
        }
    }
    (maxs, mins)
}

fn check_position(signal: &Signal, n: usize, r: usize) -> Result<()> {
    if r < 1 {
        return Err(Error::param("r", "radius must be >= 1"));
    }
    if n >= signal.len() {
        return Err(Error::param(
            "n",
            format!("position {n} outside signal of {} samples", signal.len()),
        ));
    }
    Ok(())
}

fn clamped(samples: &[f64], idx: isize) -> f64 {
    samples[idx.clamp(0, samples.len() as isize - 1) as usize]
}

/// Vertical extent of the disk sausage at sampling position `n`.
pub fn extent_disk(signal: &Signal, n: usize, r: usize) -> Result<f64> {
    check_position(signal, n, r)?;
    let profile = disk_profile(r)?;
    let s = signal.samples();
    let base = n as isize - r as isize;
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (p, &c) in profile.offsets.iter().enumerate() {
        let x = clamped(s, base + p as isize);
        hi = hi.max(x + c as f64);
        lo = lo.min(x - c as f64);
    }
    Ok(hi - lo)
}

/// Vertical extent of the square sausage at sampling position `n`.
pub fn extent_square(signal: &Signal, n: usize, r: usize) -> Result<f64> {
    check_position(signal, n, r)?;
    let s = signal.samples();
    let base = n as isize - r as isize;
    let (mx, mn) = (0..=2 * r as isize)
        .map(|p| clamped(s, base + p))
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), x| (a.max(x), b.min(x)));
    Ok((mx - mn) + 2.0 * r as f64)
}

/// Sum of per-position extents over `start..start + len`.
pub fn sausage_area(signal: &Signal, start: usize, len: usize, r: usize, shape: Shape) -> Result<f64> {
    check_range(signal, start, len)?;
    if r < 1 {
        return Err(Error::param("r", "radius must be >= 1"));
    }
    let padded = PaddedSignal::new(signal.samples(), r);
    Ok(match shape {
        Shape::Disk => padded.disk_area(start, len, &disk_profile(r)?),
        Shape::Square => padded.square_area(start, len, r),
    })
}

fn check_range(signal: &Signal, start: usize, len: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::param("len", "empty range"));
    }
    if start.checked_add(len).is_none_or(|end| end > signal.len()) {
        return Err(Error::param(
            "start",
            format!("range {start}+{len} exceeds signal of {} samples", signal.len()),
        ));
    }
    Ok(())
}

/// Disk areas for a ladder of radii inside one analysis window.
pub fn disk_areas(padded: &PaddedSignal, start: usize, len: usize, radii: &[usize]) -> Vec<f64> {
    radii
        .iter()
        .map(|&r| {
            let profile = disk_profile(r).expect("ladder radii are >= 1");
            padded.disk_area(start, len, &profile)
        })
        .collect()
}

fn profile_from_areas(areas: &[f64], radii: &[usize]) -> MfdProfile {
    let values = areas
        .windows(2)
        .zip(radii.windows(2))
        .map(|(a, r)| dimension_from_areas(a[0], a[1], r[0], r[1]))
        .collect();
    MfdProfile {
        values,
        scale_axis: radii.windows(2).map(|w| (w[0], w[1])).collect(),
    }
}

/// Base MFD: unit-step radii 1..=132 with the disk figure.
pub fn mfd_base(signal: &Signal, start: usize, len: usize) -> Result<MfdProfile> {
    check_range(signal, start, len)?;
    let radii: Vec<usize> = (1..=BASE_MFD_LEN + 1).collect();
    let padded = PaddedSignal::new(signal.samples(), BASE_MFD_LEN + 1);
    Ok(profile_from_areas(&disk_areas(&padded, start, len, &radii), &radii))
}

/// Enhanced MFD over the exponential radius ladder for one window.
pub fn enhanced_mfd(signal: &Signal, start: usize, len: usize) -> Result<MfdProfile> {
    check_range(signal, start, len)?;
    let ladder = emfd_ladder();
    let pad = *ladder.radii().last().expect("non-empty ladder");
    let padded = PaddedSignal::new(signal.samples(), pad);
    Ok(enhanced_mfd_padded(&padded, start, len, &ladder))
}

/// Enhanced MFD with a caller-supplied padded signal (pad must cover the
/// ladder's largest radius).
pub fn enhanced_mfd_padded(padded: &PaddedSignal, start: usize, len: usize, ladder: &RadiiLadder) -> MfdProfile {
    profile_from_areas(&disk_areas(padded, start, len, ladder.radii()), ladder.radii())
}

/// Samples per analysis period.
pub fn period_samples(sample_rate: u32, period_ms: f64) -> usize {
    (period_ms * f64::from(sample_rate) / 1000.0).round() as usize
}

/// Start positions of the non-overlapping analysis windows.
pub fn analysis_windows(signal: &Signal, period_ms: f64) -> Result<Vec<usize>> {
    if !(period_ms > 0.0) || !period_ms.is_finite() {
        return Err(Error::param("period_ms", "must be a positive number"));
    }
    let period = period_samples(signal.sample_rate(), period_ms);
    if period == 0 {
        return Err(Error::param("period_ms", "shorter than one sample"));
    }
    let count = signal.len() / period;
    if count == 0 {
        return Err(Error::TooShort {
            samples: signal.len(),
            needed: period,
        });
    }
    Ok((0..count).map(|i| i * period).collect())
}

/// Square-sausage areas over every position of the whole signal.
pub fn whole_square_areas(samples: &[f64], radii: &[usize]) -> Vec<f64> {
    let Some(&max_r) = radii.iter().max() else {
        return Vec::new();
    };
    let padded = PaddedSignal::new(samples, max_r);
    radii.iter().map(|&r| padded.square_area(0, samples.len(), r)).collect()
}

/// Very-long-range profile over the whole signal (no tiling).
pub fn mfdvl_profile(signal: &Signal) -> Result<MfdProfile> {
    if signal.is_empty() {
        return Err(Error::TooShort { samples: 0, needed: 1 });
    }
    let ladder = mfdvl_radii(signal.sample_rate())?;
    let areas = whole_square_areas(signal.samples(), ladder.radii());
    Ok(profile_from_areas(&areas, ladder.radii()))
}
