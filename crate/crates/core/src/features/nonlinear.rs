//! Nonlinear dynamical measures: recurrence period density entropy,
//! detrended fluctuation analysis and pitch period entropy.

use serde::{Deserialize, Serialize};

use super::stats::{median, normalized_entropy};
use super::FeatureError;
use crate::contour::{track_pitch, CycleContour, PitchConfig};
use crate::corpus::Segment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpdeConfig {
    pub dimension: usize,
    /// Ball radius as a fraction of the RMS spread of the embedded points.
    pub radius_factor: f64,
    /// Fundamental frequency used for the delay; estimated when absent.
    pub f0_hz: Option<f64>,
    /// Lowest expected F0; sets the longest recurrence time considered.
    pub f0_min_hz: f64,
    /// Number of embedded points used as recurrence origins.
    pub max_origins: usize,
    pub min_seconds: f64,
}

impl Default for RpdeConfig {
    fn default() -> Self {
        RpdeConfig {
            dimension: 4,
            radius_factor: 0.12,
            f0_hz: None,
            f0_min_hz: 50.0,
            max_origins: 20_000,
            min_seconds: 1.0,
        }
    }
}

fn estimate_f0(seg: &Segment<'_>) -> Option<f64> {
    let frames = track_pitch(seg.samples, seg.sample_rate_hz, &PitchConfig::default());
    let periods: Vec<f64> = frames.iter().filter_map(|f| f.period).collect();
    (!periods.is_empty()).then(|| seg.rate() / median(&periods))
}

/// Recurrence period density entropy in [0, 1].
pub fn rpde(seg: &Segment<'_>, cfg: &RpdeConfig) -> Result<f64, FeatureError> {
    let rate = seg.rate();
    let x = seg.samples;
    let needed = (cfg.min_seconds * rate).ceil() as usize;
    if x.len() < needed {
        return Err(FeatureError::TooShort {
            what: "rpde",
            len: x.len(),
            needed,
        });
    }
    let f0 = cfg
        .f0_hz
        .or_else(|| estimate_f0(seg))
        .unwrap_or(cfg.f0_min_hz);
    let delay = ((rate / (4.0 * f0)).round() as usize).max(1);
    let dim = cfg.dimension.max(1);
    let span = (dim - 1) * delay;
    if x.len() <= span + 1 {
        return Err(FeatureError::TooShort {
            what: "rpde embedding",
            len: x.len(),
            needed: span + 2,
        });
    }
    let n = x.len() - span;

    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
    // The embedded cloud's total variance is `dim` times the signal variance.
    let radius = cfg.radius_factor * (dim as f64 * var).sqrt();
    if radius <= 0.0 {
        return Err(FeatureError::NoRecurrences);
    }
    let r2 = radius * radius;
    let dist2 = |i: usize, j: usize| {
        let mut s = 0.0;
        for d in 0..dim {
            let v = x[i + d * delay] - x[j + d * delay];
            s += v * v;
        }
        s
    };

    let t_max = (2.0 * rate / cfg.f0_min_hz).ceil() as usize;
    let origins = cfg.max_origins.max(1).min(n);
    let stride = (n as f64 / origins as f64).max(1.0);
    let mut hist = vec![0.0; t_max + 1];
    let mut total = 0usize;
    for o in 0..origins {
        let i = (o as f64 * stride) as usize;
        let limit = (i + t_max).min(n - 1);
        let mut j = i + 1;
        while j <= limit && dist2(i, j) < r2 {
            j += 1;
        }
        while j <= limit && dist2(i, j) >= r2 {
            j += 1;
        }
        if j <= limit {
            hist[j - i] += 1.0;
            total += 1;
        }
    }
    if total == 0 {
        return Err(FeatureError::NoRecurrences);
    }
    Ok(normalized_entropy(&hist[1..], t_max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaConfig {
    pub min_box: usize,
    pub max_box: usize,
    pub n_boxes: usize,
    pub min_samples: usize,
}

impl Default for DfaConfig {
    fn default() -> Self {
        DfaConfig {
            min_box: 50,
            max_box: 1000,
            n_boxes: 10,
            min_samples: 4096,
        }
    }
}

/// Raw scaling exponent and its logistic squashing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfaResult {
    pub alpha: f64,
    pub squashed: f64,
}

/// Detrended fluctuation analysis of a sequence.
pub fn dfa_series(x: &[f64], cfg: &DfaConfig) -> Result<DfaResult, FeatureError> {
    if x.len() < cfg.min_samples.max(cfg.max_box) {
        return Err(FeatureError::TooShort {
            what: "dfa",
            len: x.len(),
            needed: cfg.min_samples.max(cfg.max_box),
        });
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut y = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for v in x {
        acc += v - mean;
        y.push(acc);
    }
    let (lmin, lmax) = ((cfg.min_box as f64).ln(), (cfg.max_box as f64).ln());
    let mut sizes: Vec<usize> = (0..cfg.n_boxes)
        .map(|i| (lmin + (lmax - lmin) * i as f64 / (cfg.n_boxes - 1).max(1) as f64).exp().round() as usize)
        .collect();
    sizes.dedup();

    let mut pts = Vec::new();
    for &s in &sizes {
        let sf = s as f64;
        // Regressor t = 0..s-1, centred.
        let tc = (sf - 1.0) / 2.0;
        let stt: f64 = (0..s).map(|t| (t as f64 - tc).powi(2)).sum();
        let boxes = y.len() / s;
        let mut sse = 0.0;
        for b in 0..boxes {
            let seg = &y[b * s..(b + 1) * s];
            let ym = seg.iter().sum::<f64>() / sf;
            let sty: f64 = seg.iter().enumerate().map(|(t, v)| (t as f64 - tc) * (v - ym)).sum();
            let slope = sty / stt;
            sse += seg
                .iter()
                .enumerate()
                .map(|(t, v)| (v - ym - slope * (t as f64 - tc)).powi(2))
                .sum::<f64>();
        }
        let f = (sse / (boxes * s) as f64).sqrt();
        if f > 0.0 {
            pts.push((sf.ln(), f.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(FeatureError::Degenerate("dfa of a linear signal"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let alpha = sxy / sxx;
    Ok(DfaResult {
        alpha,
        squashed: 1.0 / (1.0 + (-alpha).exp()),
    })
}

pub fn dfa(seg: &Segment<'_>, cfg: &DfaConfig) -> Result<DfaResult, FeatureError> {
    dfa_series(seg.samples, cfg)
}

pub const PPE_MIN_CYCLES: usize = 32;
const PPE_BINS: usize = 30;
const PPE_RANGE: f64 = 4.0;

/// Least-squares order-2 linear prediction residuals (no intercept).
fn ar2_residuals(s: &[f64]) -> Vec<f64> {
    let (mut r11, mut r12, mut r22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 2..s.len() {
        let (p1, p2, y) = (s[i - 1], s[i - 2], s[i]);
        r11 += p1 * p1;
        r12 += p1 * p2;
        r22 += p2 * p2;
        b1 += p1 * y;
        b2 += p2 * y;
    }
    let det = r11 * r22 - r12 * r12;
    let scale = (r11 * r22).max(1e-300);
    let (a1, a2) = if det.abs() > 1e-12 * scale && det != 0.0 {
        ((b1 * r22 - b2 * r12) / det, (r11 * b2 - r12 * b1) / det)
    } else if r11 > 0.0 {
        (b1 / r11, 0.0)
    } else {
        (0.0, 0.0)
    };
    (2..s.len()).map(|i| s[i] - a1 * s[i - 1] - a2 * s[i - 2]).collect()
}

/// Pitch period entropy of a cycle contour, in [0, 1].
pub fn ppe(contour: &CycleContour) -> Result<f64, FeatureError> {
    if contour.len() < PPE_MIN_CYCLES {
        return Err(FeatureError::TooFewCycles {
            what: "ppe",
            found: contour.len(),
            needed: PPE_MIN_CYCLES,
        });
    }
    let med = median(&contour.f0_hz);
    let semis: Vec<f64> = contour.f0_hz.iter().map(|f| 12.0 * (f / med).log2()).collect();
    let resid = ar2_residuals(&semis);
    let width = 2.0 * PPE_RANGE / PPE_BINS as f64;
    let mut hist = [0.0; PPE_BINS];
    for r in resid {
        let b = ((r + PPE_RANGE) / width).floor().clamp(0.0, (PPE_BINS - 1) as f64) as usize;
        hist[b] += 1.0;
    }
    Ok(normalized_entropy(&hist, PPE_BINS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn rpde_periodic_vs_stochastic() {
        let rate = 44_100;
        let sine: Vec<f64> = (0..rate * 2)
            .map(|i| (2.0 * std::f64::consts::PI * 150.0 * i as f64 / rate as f64).sin())
            .collect();
        let cfg = RpdeConfig::default();
        let periodic = rpde(&Segment::from_samples(&sine, rate as u32), &cfg).unwrap();
        assert!(periodic <= 0.1, "{periodic}");
        let w = noise(rate * 2, 1);
        let stochastic = rpde(&Segment::from_samples(&w, rate as u32), &cfg).unwrap();
        assert!(stochastic >= 0.8, "{stochastic}");
    }

    #[test]
    fn dfa_white_noise_and_random_walk() {
        let x = noise(20_000, 5);
        let a = dfa_series(&x, &DfaConfig::default()).unwrap();
        assert!((a.alpha - 0.5).abs() < 0.1, "{}", a.alpha);
        assert!(a.squashed > 0.0 && a.squashed < 1.0);
        let mut walk = Vec::new();
        let mut acc = 0.0;
        for v in &x {
            acc += v;
            walk.push(acc);
        }
        let b = dfa_series(&walk, &DfaConfig::default()).unwrap();
        assert!((b.alpha - 1.5).abs() < 0.15, "{}", b.alpha);
    }

    #[test]
    fn dfa_too_short() {
        assert!(matches!(
            dfa_series(&[0.0; 4095], &DfaConfig::default()),
            Err(FeatureError::TooShort { .. })
        ));
    }

    fn contour_from_f0(f0: &[f64]) -> CycleContour {
        let periods: Vec<f64> = f0.iter().map(|f| 44_100.0 / f).collect();
        CycleContour::from_periods(&periods, &vec![1.0; f0.len()], 44_100)
    }

    #[test]
    fn ppe_constant_contour_is_near_zero() {
        assert!(ppe(&contour_from_f0(&[130.0; 200])).unwrap() <= 0.05);
    }

    #[test]
    fn ppe_transposition_invariant() {
        let f0: Vec<f64> = noise(300, 9).iter().map(|z| 120.0 * (1.0 + 0.02 * z)).collect();
        let up: Vec<f64> = f0.iter().map(|f| f * 1.2).collect();
        let a = ppe(&contour_from_f0(&f0)).unwrap();
        let b = ppe(&contour_from_f0(&up)).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn ppe_grows_with_residual_spread() {
        let z = noise(400, 11);
        let contour = |sd: f64| {
            let f0: Vec<f64> = z.iter().map(|v| 120.0 * 2f64.powf(sd * v / 12.0)).collect();
            ppe(&contour_from_f0(&f0)).unwrap()
        };
        assert!(contour(0.5) > contour(0.05));
    }

    #[test]
    fn ppe_needs_32_cycles() {
        assert!(matches!(
            ppe(&contour_from_f0(&[100.0; 31])),
            Err(FeatureError::TooFewCycles { .. })
        ));
    }
}
