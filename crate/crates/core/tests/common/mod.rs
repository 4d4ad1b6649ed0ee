//! Brute-force reference implementations shared by the integration tests.
//! Written directly from the definitions, without any of the library's
//! padding, deques or precomputed profiles.
#![allow(dead_code)]

/// The EMFD radius ladder, spelled out.
pub const EMFD_RADII: [usize; 17] = [1, 2, 3, 4, 5, 8, 11, 15, 21, 29, 40, 57, 79, 111, 156, 218, 305];

fn at(s: &[f64], i: isize) -> f64 {
    let last = s.len() as isize - 1;
    s[i.clamp(0, last) as usize]
}

fn disk_offset(r: usize, i: usize) -> f64 {
    let (r, i) = (r as f64, i as f64);
    (2.0 * r * i - i * i).sqrt().floor()
}

pub fn extent_disk(s: &[f64], n: usize, r: usize) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for p in 0..=2 * r {
        let x = at(s, n as isize - r as isize + p as isize);
        let c = disk_offset(r, p);
        if x + c > hi {
            hi = x + c;
        }
        if x - c < lo {
            lo = x - c;
        }
    }
    hi - lo
}

pub fn extent_square(s: &[f64], n: usize, r: usize) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for p in 0..=2 * r {
        let x = at(s, n as isize - r as isize + p as isize);
        hi = hi.max(x);
        lo = lo.min(x);
    }
    (hi - lo) + 2.0 * r as f64
}

pub fn area_disk(s: &[f64], start: usize, len: usize, r: usize) -> f64 {
    let mut a = 0.0;
    for n in start..start + len {
        a += extent_disk(s, n, r);
    }
    a
}

pub fn area_square(s: &[f64], start: usize, len: usize, r: usize) -> f64 {
    let mut a = 0.0;
    for n in start..start + len {
        a += extent_square(s, n, r);
    }
    a
}

pub fn dimension(a1: f64, a2: f64, r1: usize, r2: usize) -> f64 {
    2.0 - (a2 / a1).ln() / (r2 as f64 / r1 as f64).ln()
}

pub fn enhanced_mfd(s: &[f64], start: usize, len: usize) -> Vec<f64> {
    let areas: Vec<f64> = EMFD_RADII.iter().map(|&r| area_disk(s, start, len, r)).collect();
    (0..16)
        .map(|b| dimension(areas[b], areas[b + 1], EMFD_RADII[b], EMFD_RADII[b + 1]))
        .collect()
}

/// 16 x 32 histogram from independently recomputed window profiles.
pub fn emfd_histogram(s: &[f64], window: usize) -> Vec<[f64; 32]> {
    let naw = s.len() / window;
    let mut hist = vec![[0.0; 32]; 16];
    for w in 0..naw {
        let profile = enhanced_mfd(s, w * window, window);
        for (b, v) in profile.iter().enumerate() {
            let mut d = 0usize;
            while d < 31 && *v >= 1.0 + (d as f64 + 1.0) / 32.0 {
                d += 1;
            }
            hist[b][d] += 1.0;
        }
    }
    for row in &mut hist {
        for c in row.iter_mut() {
            *c /= naw as f64;
        }
    }
    hist
}

/// MFD-VL straight from the definition: whole copies tiled past one second,
/// square-sausage areas over every position.
pub fn mfdvl(s: &[f64], sample_rate: u32) -> Vec<f64> {
    let sf = sample_rate as f64;
    let mut tiled = s.to_vec();
    while tiled.len() as f64 / sf <= 1.0 {
        tiled.extend_from_slice(s);
    }
    let radii: Vec<usize> = (0..=10)
        .map(|x| (sf * 2f64.powf(-(x as f64 + 2.0) / 2.0)).round() as usize)
        .collect();
    let areas: Vec<f64> = radii.iter().map(|&r| area_square(&tiled, 0, tiled.len(), r)).collect();
    (0..10)
        .map(|x| dimension(areas[x], areas[x + 1], radii[x], radii[x + 1]))
        .collect()
}

/// Periodogram by direct DFT at the requested frequencies (Hann tapered).
pub fn dft_power(s: &[f64], sample_rate: f64, freqs: &[f64]) -> Vec<f64> {
    let n = s.len();
    let tapered: Vec<f64> = s
        .iter()
        .enumerate()
        .map(|(i, x)| x * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    freqs
        .iter()
        .map(|&f| {
            let w = 2.0 * std::f64::consts::PI * f / sample_rate;
            let (mut re, mut im) = (0.0, 0.0);
            for (i, x) in tapered.iter().enumerate() {
                let (sn, cs) = (w * i as f64).sin_cos();
                re += x * cs;
                im -= x * sn;
            }
            re * re + im * im
        })
        .collect()
}

pub fn rms(s: &[f64]) -> f64 {
    (s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64).sqrt()
}

/// Lag (in samples, within `lo..=hi`) maximizing the autocorrelation of the
/// mean-removed series.
pub fn autocorr_peak(s: &[f64], lo: usize, hi: usize) -> usize {
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let c: Vec<f64> = s.iter().map(|x| x - mean).collect();
    (lo..=hi)
        .map(|lag| {
            let v: f64 = c[..c.len() - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum();
            (lag, v / (c.len() - lag) as f64)
        })
        .fold((lo, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best })
        .0
}

/// Frame-averaged envelope: mean |x| over consecutive blocks of `block` samples.
pub fn block_envelope(s: &[f64], block: usize) -> Vec<f64> {
    s.chunks_exact(block)
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>() / block as f64)
        .collect()
}

/// Deterministic uniform noise in [-amp, amp] (xorshift), independent of the
/// library's RNG.
pub fn xorshift_noise(n: usize, seed: u64, amp: f64) -> Vec<f64> {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            ((x >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0) * amp
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
