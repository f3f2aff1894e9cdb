//! LASSO regularization path by exact homotopy.
//!
//! The solution path of `(1/2n)|y - Xb|^2 + lambda |b|_1` is piecewise
//! linear in `lambda`. Starting from `lambda_max` (all zero), the active set
//! changes only when an inactive feature's residual correlation reaches
//! `lambda` or an active coefficient crosses zero; between those events the
//! coefficients move along a direction solved from the active Gram matrix.
//! Grid points are read off the path exactly.

use serde::{Deserialize, Serialize};

use super::{centred_targets, is_constant, FeatureMatrix, Ranking, SelectionError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    pub n_lambdas: usize,
    /// Smallest penalty as a fraction of the all-zero penalty.
    pub min_ratio: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            n_lambdas: 100,
            min_ratio: 0.01,
        }
    }
}

/// Coefficients along the penalty grid, on standardized features
/// (zero mean, unit population variance) and the centred ±1 target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    /// `coefs[k][j]` is feature `j`'s coefficient at `lambdas[k]`.
    pub coefs: Vec<Vec<f64>>,
    /// Penalty at which each feature first became active, if it did before
    /// the end of the grid.
    pub entry_lambda: Vec<Option<f64>>,
    /// Residual correlations at the smallest grid penalty.
    pub final_correlations: Vec<f64>,
    pub constant: Vec<bool>,
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major, `k x k`);
/// `None` when a pivot is numerically zero.
fn cholesky_solve(a: &[f64], k: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if s <= 1e-10 * a[i * k + i].max(1.0) {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut z = b.to_vec();
    for i in 0..k {
        for p in 0..i {
            z[i] -= l[i * k + p] * z[p];
        }
        z[i] /= l[i * k + i];
    }
    for i in (0..k).rev() {
        for p in i + 1..k {
            z[i] -= l[p * k + i] * z[p];
        }
        z[i] /= l[i * k + i];
    }
    Some(z)
}

struct Design {
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    constant: Vec<bool>,
    n: f64,
}

impl Design {
    fn new(m: &FeatureMatrix) -> Design {
        let nf = m.n_rows() as f64;
        let d = m.n_features();
        let mut cols = Vec::with_capacity(d);
        let mut constant = vec![false; d];
        for (j, flag) in constant.iter_mut().enumerate() {
            let c = m.column(j);
            let mu = c.iter().sum::<f64>() / nf;
            let sd = (c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / nf).sqrt();
            if is_constant(sd, mu) {
                *flag = true;
                cols.push(vec![0.0; c.len()]);
            } else {
                cols.push(c.iter().map(|v| (v - mu) / sd).collect());
            }
        }
        Design {
            cols,
            y: centred_targets(m),
            constant,
            n: nf,
        }
    }

    fn corr(&self, r: &[f64], j: usize) -> f64 {
        self.cols[j].iter().zip(r).map(|(a, b)| a * b).sum::<f64>() / self.n
    }

    fn gram(&self, a: usize, b: usize) -> f64 {
        self.cols[a].iter().zip(&self.cols[b]).map(|(x, y)| x * y).sum::<f64>() / self.n
    }
}

/// The path on a log grid of `n_lambdas` penalties from `lambda_max` down
/// to `min_ratio * lambda_max`.
pub fn lasso_path(m: &FeatureMatrix, cfg: &LassoConfig) -> Result<LassoPath, SelectionError> {
    m.check_rankable(1)?;
    let x = Design::new(m);
    let d = m.n_features();
    let mut r = x.y.clone();
    let mut c: Vec<f64> = (0..d).map(|j| x.corr(&r, j)).collect();
    let lambda_max = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let k = cfg.n_lambdas.max(1);
    let lambdas: Vec<f64> = (0..k)
        .map(|i| {
            let frac = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
            lambda_max * cfg.min_ratio.powf(frac)
        })
        .collect();
    let lambda_min = *lambdas.last().expect("non-empty grid");

    let mut beta = vec![0.0; d];
    let mut coefs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut entry: Vec<Option<f64>> = vec![None; d];
    let mut active: Vec<usize> = Vec::new();
    // Features whose addition would make the active Gram matrix singular.
    let mut blocked = vec![false; d];
    let mut lam = lambda_max;
    let mut next_grid = 0;
    let mut just_dropped: Option<usize> = None;

    if lambda_max > 0.0 {
        let mut first = (0..d).filter(|&j| !x.constant[j]).collect::<Vec<_>>();
        first.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()).then(a.cmp(&b)));
        active.push(first[0]);
        entry[first[0]] = Some(lambda_max);
    }
    let max_steps = 8 * (d + m.n_rows()) + 16;
    for _ in 0..max_steps {
        if lam <= lambda_min || active.is_empty() {
            break;
        }
        let na = active.len();
        let mut g = vec![0.0; na * na];
        for a in 0..na {
            for b in a..na {
                let v = x.gram(active[a], active[b]);
                g[a * na + b] = v;
                g[b * na + a] = v;
            }
        }
        let s: Vec<f64> = active.iter().map(|&j| c[j].signum()).collect();
        let Some(w) = cholesky_solve(&g, na, &s) else {
            // The newest member is collinear with the rest; retire it.
            let j = active.pop().expect("non-empty active set");
            blocked[j] = true;
            if entry[j] == Some(lam) && beta[j] == 0.0 {
                entry[j] = None;
            }
            continue;
        };
        // Direction of the fit and its correlation with every feature.
        let mut u = vec![0.0; m.n_rows()];
        for (&j, &wj) in active.iter().zip(&w) {
            for (ui, xi) in u.iter_mut().zip(&x.cols[j]) {
                *ui += wj * xi;
            }
        }
        let mut gamma = lam - lambda_min;
        let mut event: Option<(usize, bool)> = None;
        for j in 0..d {
            if x.constant[j] || blocked[j] || active.contains(&j) || Some(j) == just_dropped {
                continue;
            }
            let a = x.corr(&u, j);
            for cand in [(lam - c[j]) / (1.0 - a), (lam + c[j]) / (1.0 + a)] {
                if cand.is_finite() && cand > 1e-14 && cand < gamma {
                    gamma = cand;
                    event = Some((j, true));
                }
            }
        }
        for (pos, &j) in active.iter().enumerate() {
            if w[pos] != 0.0 {
                let cand = -beta[j] / w[pos];
                if cand > 1e-14 && cand < gamma {
                    gamma = cand;
                    event = Some((j, false));
                }
            }
        }
        // Grid points inside this linear segment.
        while next_grid < k && lambdas[next_grid] >= lam - gamma {
            let t = lam - lambdas[next_grid];
            let mut b = beta.clone();
            for (&j, &wj) in active.iter().zip(&w) {
                b[j] += t * wj;
            }
            coefs.push(b);
            next_grid += 1;
        }
        for (&j, &wj) in active.iter().zip(&w) {
            beta[j] += gamma * wj;
        }
        lam -= gamma;
        for (ri, ui) in r.iter_mut().zip(&u) {
            *ri -= gamma * ui;
        }
        c = (0..d).map(|j| x.corr(&r, j)).collect();
        just_dropped = None;
        match event {
            Some((j, true)) => {
                active.push(j);
                if entry[j].is_none() {
                    entry[j] = Some(lam);
                }
            }
            Some((j, false)) => {
                beta[j] = 0.0;
                active.retain(|&a| a != j);
                just_dropped = Some(j);
            }
            None => {}
        }
    }
    while coefs.len() < k {
        coefs.push(beta.clone());
    }
    // Residual correlations at the smallest penalty.
    let last = coefs.last().expect("non-empty grid");
    let mut resid = x.y.clone();
    for j in 0..d {
        if last[j] != 0.0 {
            for (ri, xi) in resid.iter_mut().zip(&x.cols[j]) {
                *ri -= last[j] * xi;
            }
        }
    }
    let final_correlations = (0..d).map(|j| x.corr(&resid, j)).collect();
    for e in entry.iter_mut() {
        if e.is_some_and(|l| l < lambda_min) {
            *e = None;
        }
    }
    Ok(LassoPath {
        lambdas,
        coefs,
        entry_lambda: entry,
        final_correlations,
        constant: x.constant,
    })
}

/// Features in order of first entry to the active set. Features never
/// active on the grid follow by their coefficient, then residual
/// correlation, at the smallest penalty; constant features are last.
pub fn rank_lasso(m: &FeatureMatrix, cfg: &LassoConfig) -> Result<Ranking, SelectionError> {
    let path = lasso_path(m, cfg)?;
    let d = m.n_features();
    let last = path.coefs.last().expect("non-empty grid");
    let mut order: Vec<usize> = (0..d).filter(|&j| !path.constant[j]).collect();
    order.sort_by(|&a, &b| match (path.entry_lambda[a], path.entry_lambda[b]) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => last[b]
            .abs()
            .total_cmp(&last[a].abs())
            .then(path.final_correlations[b].abs().total_cmp(&path.final_correlations[a].abs()))
            .then(a.cmp(&b)),
    });
    let degenerate: Vec<usize> = (0..d).filter(|&j| path.constant[j]).collect();
    order.extend(&degenerate);
    Ok(Ranking {
        order,
        degenerate,
        converged: true,
    })
}
