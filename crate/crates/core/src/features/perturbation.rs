//! Cycle-to-cycle perturbation measures: jitter, shimmer, perturbation
//! quotients and glottis quotients.

use super::stats::{mean, median, sd};
use super::{FeatureError, NamedValues};
use crate::contour::CycleContour;
use crate::corpus::Segment;

pub const MIN_CYCLES: usize = 12;

fn require_cycles(what: &'static str, n: usize) -> Result<(), FeatureError> {
    if n < MIN_CYCLES {
        return Err(FeatureError::TooFewCycles {
            what,
            found: n,
            needed: MIN_CYCLES,
        });
    }
    Ok(())
}

fn abs_diffs(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
}

/// Mean absolute deviation of each value from its centred `window`-point
/// moving average, over positions where the full window fits.
fn moving_average_deviation(x: &[f64], window: usize) -> f64 {
    let h = window / 2;
    if x.len() < window {
        return 0.0;
    }
    let devs: Vec<f64> = (h..x.len() - h)
        .map(|i| (x[i] - mean(&x[i - h..=i + h])).abs())
        .collect();
    mean(&devs)
}

/// Like [`moving_average_deviation`] but each deviation is relative to its
/// own local average.
fn local_relative_deviation(x: &[f64], window: usize) -> f64 {
    let h = window / 2;
    if x.len() < window {
        return 0.0;
    }
    let devs: Vec<f64> = (h..x.len() - h)
        .map(|i| {
            let m = mean(&x[i - h..=i + h]);
            if m > 0.0 {
                (x[i] - m).abs() / m
            } else {
                0.0
            }
        })
        .collect();
    mean(&devs)
}

pub const JITTER_NAMES: [&str; 6] = [
    "Jitter_abs",
    "Jitter_rel",
    "Jitter_RAP",
    "Jitter_PPQ5",
    "Jitter_PPQ11",
    "medJitter",
];

/// Period perturbation measures. Relative measures are percentages.
pub fn jitter_family(contour: &CycleContour) -> Result<NamedValues, FeatureError> {
    require_cycles("jitter", contour.len())?;
    let t = contour.periods_seconds();
    let mt = mean(&t);
    let d = abs_diffs(&t);
    let abs = mean(&d);
    let values = [
        abs,
        abs / mt * 100.0,
        moving_average_deviation(&t, 3) / mt * 100.0,
        moving_average_deviation(&t, 5) / mt * 100.0,
        moving_average_deviation(&t, 11) / mt * 100.0,
        median(&d) / mt * 100.0,
    ];
    Ok(named(&JITTER_NAMES, &values))
}

pub const SHIMMER_NAMES: [&str; 6] = [
    "Shimmer_local",
    "Shimmer_dB",
    "Shimmer_APQ3",
    "Shimmer_APQ5",
    "PQ11.class_Schoentgen",
    "medShimmer",
];

/// Amplitude perturbation measures over the per-cycle peak amplitudes.
pub fn shimmer_family(contour: &CycleContour) -> Result<NamedValues, FeatureError> {
    require_cycles("shimmer", contour.len())?;
    let a = &contour.a0;
    let ma = mean(a);
    if ma <= 0.0 {
        return Err(FeatureError::Degenerate("shimmer on zero amplitude"));
    }
    let d = abs_diffs(a);
    let db: Vec<f64> = a
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| (20.0 * (w[1] / w[0]).log10()).abs())
        .collect();
    let values = [
        mean(&d) / ma * 100.0,
        if db.is_empty() { 0.0 } else { mean(&db) },
        moving_average_deviation(a, 3) / ma * 100.0,
        moving_average_deviation(a, 5) / ma * 100.0,
        moving_average_deviation(a, 11) / ma * 100.0,
        median(&d) / ma * 100.0,
    ];
    Ok(named(&SHIMMER_NAMES, &values))
}

pub const PQ_GQ_NAMES: [&str; 10] = [
    "P0",
    "PQ5.local_amp",
    "PQ11.local_amp",
    "PQ5.local_period",
    "PQ11.local_period",
    "GQ_open_mean",
    "GQ_open_std",
    "GQ_open_median",
    "GQ_oc_ratio_mean",
    "GQ_oc_ratio_std",
];

fn cycle_bounds(contour: &CycleContour, i: usize, len: usize) -> (usize, usize) {
    let rate = contour.sample_rate_hz as f64;
    let start = contour.marks[i].max(0.0);
    let end = start + rate / contour.f0_hz[i];
    let lo = (start.floor() as usize).min(len.saturating_sub(1));
    let hi = (end.floor() as usize).clamp(lo + 1, len);
    (lo, hi)
}

/// Fraction of a cycle whose instantaneous energy is at least half of the
/// cycle's peak energy, kept strictly inside (0, 1).
pub fn open_ratio(cycle: &[f64]) -> f64 {
    let n = cycle.len();
    if n < 2 {
        return 0.5;
    }
    let energy: Vec<f64> = cycle.iter().map(|v| v * v).collect();
    let peak = energy.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return 0.5;
    }
    let open = energy.iter().filter(|&&e| e >= 0.5 * peak).count();
    let floor = 1.0 / n as f64;
    (open as f64 / n as f64).clamp(floor, 1.0 - floor)
}

/// Zeroth-order and windowed perturbation quotients plus glottis quotients.
pub fn pq_gq(contour: &CycleContour, seg: &Segment<'_>) -> Result<NamedValues, FeatureError> {
    require_cycles("perturbation quotients", contour.len())?;
    let x = seg.samples;
    let n = contour.len();
    let mut power = Vec::with_capacity(n);
    let mut open = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = cycle_bounds(contour, i, x.len());
        let cycle = &x[lo..hi];
        power.push(cycle.iter().map(|v| v * v).sum::<f64>() / cycle.len() as f64);
        open.push(open_ratio(cycle));
    }
    let rel: Vec<f64> = power
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| (w[1] - w[0]).abs() / w[0])
        .collect();
    let p0 = if rel.is_empty() { 0.0 } else { mean(&rel) };
    let periods = contour.periods_samples();
    let oc: Vec<f64> = open.iter().map(|o| o / (1.0 - o)).collect();
    let values = [
        p0,
        local_relative_deviation(&contour.a0, 5),
        local_relative_deviation(&contour.a0, 11),
        local_relative_deviation(&periods, 5),
        local_relative_deviation(&periods, 11),
        mean(&open),
        sd(&open),
        median(&open),
        mean(&oc),
        sd(&oc),
    ];
    Ok(named(&PQ_GQ_NAMES, &values))
}

fn named(names: &[&str], values: &[f64]) -> NamedValues {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| (n.to_string(), *v))
        .collect()
}
