//! Descriptive statistics with explicit conventions.
//!
//! Quantiles use linear interpolation between order statistics (type 7).
//! Standard deviation uses the n−1 denominator, skewness is the adjusted
//! Fisher–Pearson coefficient, kurtosis is the plain excess kurtosis
//! `m4 / m2^2 − 3`. Higher moments of a constant series are defined as 0.
//! The mode is the centre of the most populated of 100 equal-width bins
//! spanning `[min, max]` (lowest bin wins ties).

use super::FeatureError;

pub const MODE_BINS: usize = 100;

/// The 13 summary statistics emitted for every summarized series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub iqr: f64,
    pub q1: f64,
    pub q3: f64,
    pub p5: f64,
    pub p95: f64,
    pub mode: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Values in inventory order.
    pub fn to_array(&self) -> [f64; 13] {
        [
            self.mean,
            self.median,
            self.sd,
            self.skewness,
            self.kurtosis,
            self.iqr,
            self.q1,
            self.q3,
            self.p5,
            self.p95,
            self.mode,
            self.min,
            self.max,
        ]
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n−1). Zero for fewer than two values.
pub fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Type-7 quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn median(x: &[f64]) -> f64 {
    quantile_sorted(&sorted(x), 0.5)
}

pub fn histogram_mode(sorted: &[f64]) -> f64 {
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if hi <= lo {
        return lo;
    }
    let width = (hi - lo) / MODE_BINS as f64;
    let mut counts = [0usize; MODE_BINS];
    for &v in sorted {
        let b = (((v - lo) / width) as usize).min(MODE_BINS - 1);
        counts[b] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    lo + (best as f64 + 0.5) * width
}

/// Full summary of a series of at least two values.
pub fn descriptive_stats(x: &[f64]) -> Result<Summary, FeatureError> {
    if x.len() < 2 {
        return Err(FeatureError::TooShort {
            what: "descriptive statistics",
            len: x.len(),
            needed: 2,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite("descriptive statistics"));
    }
    let n = x.len() as f64;
    let s = sorted(x);
    let m = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let constant = s[0] == s[s.len() - 1];
    let (skewness, kurtosis) = if constant || m2 == 0.0 {
        (0.0, 0.0)
    } else {
        let g1 = m3 / m2.powf(1.5);
        let skew = if x.len() > 2 {
            g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
        } else {
            0.0
        };
        (skew, m4 / (m2 * m2) - 3.0)
    };
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    Ok(Summary {
        mean: if constant { s[0] } else { m },
        median: quantile_sorted(&s, 0.5),
        sd: if constant { 0.0 } else { sd(x) },
        skewness,
        kurtosis,
        iqr: q3 - q1,
        q1,
        q3,
        p5: quantile_sorted(&s, 0.05),
        p95: quantile_sorted(&s, 0.95),
        mode: histogram_mode(&s),
        min: s[0],
        max: s[s.len() - 1],
    })
}

/// Normalized Shannon entropy of non-negative weights, in [0, 1].
/// `support` is the number of possible outcomes used for normalization.
pub fn normalized_entropy(weights: &[f64], support: usize) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || support < 2 {
        return 0.0;
    }
    let h: f64 = weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| {
            let p = w / total;
            -p * p.ln()
        })
        .sum();
    (h / (support as f64).ln()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series() {
        let s = descriptive_stats(&[3.25; 17]).unwrap();
        assert_eq!((s.mean, s.median, s.mode), (3.25, 3.25, 3.25));
        assert_eq!((s.sd, s.iqr, s.skewness, s.kurtosis), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn one_to_four() {
        let s = descriptive_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        assert_eq!(s.iqr, 1.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_series_has_zero_skew() {
        let x = [-3.0, -1.5, -0.2, 0.0, 0.2, 1.5, 3.0];
        assert!(descriptive_stats(&x).unwrap().skewness.abs() < 1e-12);
    }

    #[test]
    fn skewness_matches_hand_formula() {
        // x = [0, 0, 0, 1]: m = 1/4, m2 = 3/16, m3 = 3/32.
        let s = descriptive_stats(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        let g1 = (3.0 / 32.0) / (3.0f64 / 16.0).powf(1.5);
        let expect = g1 * (12.0f64).sqrt() / 2.0;
        assert!((s.skewness - expect).abs() < 1e-12);
    }

    #[test]
    fn mode_picks_densest_bin() {
        let mut x = vec![0.0, 10.0];
        x.extend(std::iter::repeat(7.03).take(5));
        let s = descriptive_stats(&x).unwrap();
        assert!((s.mode - 7.05).abs() < 1e-12);
    }

    #[test]
    fn too_short() {
        assert!(descriptive_stats(&[1.0]).is_err());
    }
}
