//! Multilevel db4 decomposition of the F0 contour and its Teager-Kaiser energy.

use serde::{Deserialize, Serialize};

use super::schema::{Block, WAVELET_LEVELS};
use super::stats::mean;
use super::{FeatureError, NamedValues};
use crate::contour::{tkeo, CycleContour};

/// Daubechies-4 (8-tap) decomposition low-pass filter.
pub const DB4_DEC_LO: [f64; 8] = [
    -0.010597401784997278,
    0.032883011666982945,
    0.030841381835986965,
    -0.18703481171888114,
    -0.02798376941698385,
    0.6308807679295904,
    0.7148465705525415,
    0.23037781330885523,
];

const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletConfig {
    pub levels: usize,
    /// Length of the uniform F0 grid the contour is interpolated onto.
    pub grid_len: usize,
    pub min_cycles: usize,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        WaveletConfig {
            levels: WAVELET_LEVELS,
            grid_len: 4096,
            min_cycles: 32,
        }
    }
}

fn filters() -> ([f64; 8], [f64; 8]) {
    let mut lo = DB4_DEC_LO;
    lo.reverse();
    let mut hi = [0.0; 8];
    for n in 0..8 {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        hi[n] = sign * lo[7 - n];
    }
    (lo, hi)
}

/// One periodized analysis step: `a[k] = sum_n lo[n] x[(2k+n) mod N]`,
/// likewise for the detail with the quadrature mirror filter.
pub fn dwt_step(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = filters();
    let n = x.len();
    let half = n / 2;
    let mut a = Vec::with_capacity(half);
    let mut d = Vec::with_capacity(half);
    for k in 0..half {
        let (mut sa, mut sd) = (0.0, 0.0);
        for t in 0..8 {
            let v = x[(2 * k + t) % n];
            sa += lo[t] * v;
            sd += hi[t] * v;
        }
        a.push(sa);
        d.push(sd);
    }
    (a, d)
}

/// Detail and approximation coefficients at every level, finest first.
pub struct Decomposition {
    pub details: Vec<Vec<f64>>,
    pub approximations: Vec<Vec<f64>>,
}

pub fn wavedec(x: &[f64], levels: usize) -> Result<Decomposition, FeatureError> {
    let needed = 1usize << levels;
    if x.len() < needed || x.len() % needed != 0 {
        return Err(FeatureError::TooShort {
            what: "wavelet decomposition (length must be a multiple of 2^levels)",
            len: x.len(),
            needed,
        });
    }
    let mut details = Vec::with_capacity(levels);
    let mut approximations = Vec::with_capacity(levels);
    let mut cur = x.to_vec();
    for _ in 0..levels {
        let (a, d) = dwt_step(&cur);
        details.push(d);
        approximations.push(a.clone());
        cur = a;
    }
    Ok(Decomposition {
        details,
        approximations,
    })
}

/// Linear interpolation of the F0 contour onto `len` uniformly spaced
/// instants spanning the first to the last cycle.
pub fn uniform_f0(contour: &CycleContour, len: usize) -> Vec<f64> {
    let t: Vec<f64> = contour.marks.clone();
    let f = &contour.f0_hz;
    let (t0, t1) = (t[0], t[t.len() - 1]);
    let mut j = 0;
    (0..len)
        .map(|i| {
            let ti = t0 + (t1 - t0) * i as f64 / (len - 1).max(1) as f64;
            while j + 2 < t.len() && t[j + 1] < ti {
                j += 1;
            }
            let span = t[j + 1] - t[j];
            let w = if span > 0.0 { ((ti - t[j]) / span).clamp(0.0, 1.0) } else { 0.0 };
            f[j] * (1.0 - w) + f[j + 1] * w
        })
        .collect()
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn log_entropy(x: &[f64]) -> f64 {
    x.iter().map(|v| (v * v + LOG_EPS).ln()).sum()
}

fn shannon_entropy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| v * v).collect();
    super::stats::normalized_entropy(&w, x.len())
}

fn tkeo_mean(x: &[f64]) -> f64 {
    tkeo(x).map(|t| mean(&t)).unwrap_or(0.0)
}

fn signed_log1p(v: f64) -> f64 {
    v.signum() * v.abs().ln_1p()
}

fn check(contour: &CycleContour, cfg: &WaveletConfig) -> Result<(), FeatureError> {
    if contour.len() < cfg.min_cycles.max(2) {
        return Err(FeatureError::TooFewCycles {
            what: "wavelet features",
            found: contour.len(),
            needed: cfg.min_cycles.max(2),
        });
    }
    Ok(())
}

/// Per-level features of the F0 contour decomposition.
pub fn wavelet_features(contour: &CycleContour, cfg: &WaveletConfig) -> Result<NamedValues, FeatureError> {
    check(contour, cfg)?;
    let x = uniform_f0(contour, cfg.grid_len);
    let dec = wavedec(&x, cfg.levels)?;
    let mut values = Vec::with_capacity(6 * cfg.levels);
    for k in 0..cfg.levels {
        let d = &dec.details[k];
        let a = &dec.approximations[k];
        values.extend([
            log_entropy(d),
            shannon_entropy(d),
            energy(d),
            signed_log1p(tkeo_mean(d)),
            tkeo_mean(a),
            log_entropy(a),
        ]);
    }
    Ok(Block::WaveletF0.feature_names().into_iter().zip(values).collect())
}

/// Per-level features of the decomposition of the F0 contour's
/// Teager-Kaiser energy.
pub fn wavelet_tkeo_features(contour: &CycleContour, cfg: &WaveletConfig) -> Result<NamedValues, FeatureError> {
    check(contour, cfg)?;
    let x = uniform_f0(contour, cfg.grid_len + 2);
    let t = tkeo(&x).map_err(|_| FeatureError::Degenerate("tkeo of F0"))?;
    let dec = wavedec(&t, cfg.levels)?;
    let mut values = Vec::with_capacity(4 * cfg.levels);
    for k in 0..cfg.levels {
        let d = &dec.details[k];
        values.extend([
            energy(d),
            log_entropy(d),
            shannon_entropy(d),
            log_entropy(&dec.approximations[k]),
        ]);
    }
    Ok(Block::WaveletTkeo.feature_names().into_iter().zip(values).collect())
}
