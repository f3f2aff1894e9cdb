//! Two-sample hypothesis tests.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Ks2,
    Mwu,
    Ttest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
}

fn need(a: &[f64], b: &[f64], n: usize) -> Result<(), EvalError> {
    let got = a.len().min(b.len());
    if got < n {
        return Err(EvalError::TooFewSamples { needed: n, got });
    }
    Ok(())
}

/// Kolmogorov survival function `2 sum (-1)^(j-1) exp(-2 j^2 x^2)`.
fn kolmogorov_q(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * x * x).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Largest product `na * nb` for which the exact null distribution is used.
const KS_EXACT_MAX_CELLS: usize = 10_000;

/// Probability that a uniformly random lattice path from `(0, 0)` to
/// `(na, nb)` keeps `|i nb - j na| < d` at every step.
fn ks_inside_probability(na: usize, nb: usize, d: u64) -> f64 {
    let inside = |i: usize, j: usize| ((i * nb) as i64 - (j * na) as i64).unsigned_abs() < d;
    let mut prob = vec![vec![0.0f64; nb + 1]; na + 1];
    prob[0][0] = 1.0;
    for i in 0..=na {
        for j in 0..=nb {
            let p = prob[i][j];
            if p == 0.0 || !inside(i, j) {
                prob[i][j] = 0.0;
                continue;
            }
            let left = (na - i + nb - j) as f64;
            if i < na {
                prob[i + 1][j] += p * (na - i) as f64 / left;
            }
            if j < nb {
                prob[i][j + 1] += p * (nb - j) as f64 / left;
            }
        }
    }
    prob[na][nb]
}

/// Two-sided two-sample KS test. The p-value is exact (lattice-path count
/// of the permutation distribution, assuming no ties) when
/// `na * nb <= 10 000`, otherwise asymptotic, evaluated at
/// `(sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) * D`.
pub fn ks_test_2sample(a: &[f64], b: &[f64]) -> Result<TestResult, EvalError> {
    need(a, b, 5)?;
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    // D scaled by na * nb.
    let mut d_cells: u64 = 0;
    while i < na && j < nb {
        let v = x[i].min(y[j]);
        while i < na && x[i] <= v {
            i += 1;
        }
        while j < nb && y[j] <= v {
            j += 1;
        }
        d_cells = d_cells.max(((i * nb) as i64 - (j * na) as i64).unsigned_abs());
    }
    let d = d_cells as f64 / (na * nb) as f64;
    let p = if d_cells == 0 {
        1.0
    } else if na * nb <= KS_EXACT_MAX_CELLS {
        (1.0 - ks_inside_probability(na, nb, d_cells)).clamp(0.0, 1.0)
    } else {
        let ne = ((na * nb) as f64 / (na + nb) as f64).sqrt();
        kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)
    };
    Ok(TestResult {
        test: TestKind::Ks2,
        statistic: d,
        p_value: p,
    })
}

/// Mid-ranks of the pooled sample, doubled so they are integers.
fn doubled_ranks(a: &[f64], b: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // Ranks i+1..=j+1 averaged, times two.
        let r2 = (i + 1 + j + 1) as u64;
        for p in &pooled[i..=j] {
            ranks[p.1] = r2;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Mann-Whitney U of `a` against `b`. Exact permutation p-value when both
/// samples have at most 12 values, tie-corrected normal approximation with
/// continuity correction otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult, EvalError> {
    need(a, b, 3)?;
    let (na, nb) = (a.len(), b.len());
    let (ranks, ties) = doubled_ranks(a, b);
    let ra2: u64 = ranks[..na].iter().sum();
    let offset2 = (na * (na + 1)) as u64;
    let u = (ra2 as f64 - offset2 as f64) / 2.0;
    let mu = (na * nb) as f64 / 2.0;
    let p = if na <= 12 && nb <= 12 {
        exact_p(&ranks, na, ra2, offset2, mu)
    } else {
        let n = (na + nb) as f64;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
        let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term);
        if var <= 0.0 {
            1.0
        } else {
            let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            (2.0 * normal.sf(z)).min(1.0)
        }
    };
    Ok(TestResult {
        test: TestKind::Mwu,
        statistic: u,
        p_value: p,
    })
}

/// Permutation distribution of the first sample's doubled rank sum,
/// counted by dynamic programming over subsets of the pooled ranks.
fn exact_p(ranks: &[u64], na: usize, ra2: u64, offset2: u64, mu: f64) -> f64 {
    let total: u64 = ranks.iter().sum();
    let max = total as usize;
    // ways[k][s]: subsets of size k with doubled rank sum s.
    let mut ways = vec![vec![0f64; max + 1]; na + 1];
    ways[0][0] = 1.0;
    for &r in ranks {
        let r = r as usize;
        for k in (1..=na).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (r..=max).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let observed = ((ra2 as f64 - offset2 as f64) / 2.0 - mu).abs();
    let mut extreme = 0.0;
    let mut all = 0.0;
    for (s, &w) in ways[na].iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        all += w;
        let dev = ((s as f64 - offset2 as f64) / 2.0 - mu).abs();
        if dev >= observed - 1e-9 {
            extreme += w;
        }
    }
    (extreme / all).min(1.0)
}

/// Welch's unequal-variance t-test, two-sided.
pub fn t_test_unpaired(a: &[f64], b: &[f64]) -> Result<TestResult, EvalError> {
    need(a, b, 3)?;
    let moments = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    if se2 <= 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TestResult {
        test: TestKind::Ttest,
        statistic: t,
        p_value: p,
    })
}
