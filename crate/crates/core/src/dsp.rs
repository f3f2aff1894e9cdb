//! FFT-backed helpers shared by the contour tracker and the feature code.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Forward FFT of `x` zero-padded to `n` points.
pub(crate) fn fft_real(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().take(n).map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));
    buf
}

/// Normalized inverse FFT in place.
pub(crate) fn ifft(buf: &mut [Complex64]) {
    let n = buf.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(buf));
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Normalized autocorrelation of a mean-removed frame for lags `0..=max_lag`.
///
/// `r[L] = sum x[n] x[n+L] / sqrt(sum_{n<W-L} x[n]^2 * sum_{n>=L} x[n]^2)`,
/// so a perfectly periodic frame reaches 1 at its period regardless of how
/// much of the frame overlaps at that lag.
pub(crate) fn normalized_autocorr(frame: &[f64], max_lag: usize) -> Vec<f64> {
    let w = frame.len();
    let max_lag = max_lag.min(w.saturating_sub(1));
    let mean = frame.iter().sum::<f64>() / w.max(1) as f64;
    let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();
    let n = next_pow2(w + max_lag + 1);
    let mut spec = fft_real(&x, n);
    for v in spec.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    ifft(&mut spec);

    let mut prefix = Vec::with_capacity(w + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in &x {
        acc += v * v;
        prefix.push(acc);
    }
    let total = acc;
    (0..=max_lag)
        .map(|lag| {
            let head = prefix[w - lag];
            let tail = total - prefix[lag];
            let denom = (head * tail).sqrt();
            if denom > 0.0 {
                (spec[lag].re / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Vertex of the parabola through `(−1, a)`, `(0, b)`, `(1, c)`:
/// returns the offset from the centre sample and the interpolated height.
pub(crate) fn parabolic_peak(a: f64, b: f64, c: f64) -> (f64, f64) {
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return (0.0, b);
    }
    let delta = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
    (delta, b - 0.25 * (a - c) * delta)
}

/// A periodicity candidate: fractional lag in samples and its correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub lag: f64,
    pub score: f64,
}

/// Local maxima of `r` inside `[min_lag, max_lag]`, parabolically refined,
/// sorted by descending score.
pub(crate) fn periodicity_candidates(r: &[f64], min_lag: usize, max_lag: usize) -> Vec<Candidate> {
    let hi = max_lag.min(r.len().saturating_sub(2));
    let lo = min_lag.max(1);
    let mut out = Vec::new();
    if lo > hi {
        return out;
    }
    for lag in lo..=hi {
        if r[lag] > r[lag - 1] && r[lag] >= r[lag + 1] && r[lag] > 0.0 {
            let (d, peak) = parabolic_peak(r[lag - 1], r[lag], r[lag + 1]);
            out.push(Candidate {
                lag: lag as f64 + d,
                score: peak.min(1.0),
            });
        }
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.lag.total_cmp(&b.lag)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocorr_matches_direct_sum() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let r = normalized_autocorr(&x, 60);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
        for lag in [0usize, 1, 17, 60] {
            let num: f64 = (0..c.len() - lag).map(|n| c[n] * c[n + lag]).sum();
            let e0: f64 = c[..c.len() - lag].iter().map(|v| v * v).sum();
            let e1: f64 = c[lag..].iter().map(|v| v * v).sum();
            let direct = num / (e0 * e1).sqrt();
            assert!((r[lag] - direct).abs() < 1e-10, "lag {lag}");
        }
    }

    #[test]
    fn parabola_vertex_exact_for_quadratics() {
        let f = |x: f64| 3.0 - 2.0 * (x - 0.3).powi(2);
        let (d, v) = parabolic_peak(f(-1.0), f(0.0), f(1.0));
        assert!((d - 0.3).abs() < 1e-12);
        assert!((v - 3.0).abs() < 1e-12);
    }
}
