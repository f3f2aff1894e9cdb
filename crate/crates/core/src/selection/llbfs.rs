//! Local-learning feature weighting.
//!
//! Each outer iteration locates every row's hits and misses under the
//! current weighted L1 distance, forms the expected margin vectors
//! `z = E|x - miss| - E|x - hit|` with nearer neighbours weighted more, and
//! moves the weights toward the minimizer of the logistic margin loss plus
//! an L1 penalty over `w >= 0`.

use serde::{Deserialize, Serialize};

use super::{standardized_columns, FeatureMatrix, Ranking, SelectionError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlbfsConfig {
    pub lambda: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub max_inner_steps: usize,
    /// Neighbour kernel width relative to the median pairwise distance.
    pub kernel_width: f64,
}

impl Default for LlbfsConfig {
    fn default() -> Self {
        LlbfsConfig {
            lambda: 0.05,
            max_iterations: 50,
            tolerance: 1e-6,
            max_inner_steps: 50,
            kernel_width: 1.0,
        }
    }
}

/// Margin vectors `E|x - miss| - E|x - hit|`, with neighbour probabilities
/// proportional to `exp(-d / sigma)` under the weighted L1 distance and
/// `sigma` a fixed fraction of the median pairwise distance. A width of
/// zero uses the single nearest hit and miss.
fn margins(rows: &[Vec<f64>], labels: &[u8], w: &[f64], width: f64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = w.len();
    let mut dist = vec![0.0; n * n];
    let mut all = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            let v: f64 = rows[a]
                .iter()
                .zip(&rows[b])
                .zip(w)
                .map(|((x, y), wj)| wj * (x - y).abs())
                .sum();
            dist[a * n + b] = v;
            dist[b * n + a] = v;
            all.push(v);
        }
    }
    all.sort_by(f64::total_cmp);
    let sigma = width * all.get(all.len() / 2).copied().unwrap_or(0.0);
    (0..n)
        .map(|a| {
            let mut z = vec![0.0; d];
            for hit in [true, false] {
                let others: Vec<usize> = (0..n)
                    .filter(|&b| b != a && (labels[b] == labels[a]) == hit)
                    .collect();
                let nearest = others
                    .iter()
                    .copied()
                    .min_by(|&x, &y| dist[a * n + x].total_cmp(&dist[a * n + y]).then(x.cmp(&y)))
                    .expect("each class has at least two rows");
                let probs: Vec<(usize, f64)> = if sigma > 0.0 {
                    let d0 = dist[a * n + nearest];
                    let k: Vec<f64> = others.iter().map(|&b| (-(dist[a * n + b] - d0) / sigma).exp()).collect();
                    let total: f64 = k.iter().sum();
                    others.iter().zip(k).map(|(&b, kb)| (b, kb / total)).collect()
                } else {
                    vec![(nearest, 1.0)]
                };
                let sign = if hit { -1.0 } else { 1.0 };
                for (b, p) in probs {
                    for j in 0..d {
                        z[j] += sign * p * (rows[a][j] - rows[b][j]).abs();
                    }
                }
            }
            z
        })
        .collect()
}

/// Largest eigenvalue of `Z Zᵀ` by power iteration on the small Gram matrix.
fn top_eigenvalue(z: &[Vec<f64>]) -> f64 {
    let n = z.len();
    let mut g = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v: f64 = z[a].iter().zip(&z[b]).map(|(x, y)| x * y).sum();
            g[a * n + b] = v;
            g[b * n + a] = v;
        }
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let next: Vec<f64> = (0..n).map(|a| (0..n).map(|b| g[a * n + b] * v[b]).sum()).collect();
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let prev = lambda;
        lambda = norm;
        v = next.into_iter().map(|x| x / norm).collect();
        if (lambda - prev).abs() <= 1e-9 * lambda {
            break;
        }
    }
    // Small safety margin over the power-iteration estimate.
    lambda * 1.01 + (0..n).map(|a| g[a * n + a]).fold(0.0, f64::max) * 1e-9
}

fn sigmoid_neg(m: f64) -> f64 {
    // 1 / (1 + e^m), evaluated stably.
    if m >= 0.0 {
        let e = (-m).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + m.exp())
    }
}

/// Accelerated projected gradient for the penalized margin loss.
fn fit_weights(z: &[Vec<f64>], w0: &[f64], cfg: &LlbfsConfig) -> Vec<f64> {
    let n = z.len() as f64;
    let d = w0.len();
    let lip = top_eigenvalue(z) / (4.0 * n);
    if lip <= 0.0 {
        return vec![0.0; d];
    }
    let step = 1.0 / lip;
    let mut w = w0.to_vec();
    let mut v = w.clone();
    let mut t = 1.0f64;
    let mut grad = vec![0.0; d];
    for _ in 0..cfg.max_inner_steps {
        grad.iter_mut().for_each(|g| *g = cfg.lambda);
        for zn in z {
            let margin: f64 = zn.iter().zip(&v).map(|(a, b)| a * b).sum();
            let s = sigmoid_neg(margin) / n;
            for (g, zj) in grad.iter_mut().zip(zn) {
                *g -= s * zj;
            }
        }
        let next: Vec<f64> = v.iter().zip(&grad).map(|(vj, gj)| (vj - step * gj).max(0.0)).collect();
        let change = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        v = next.iter().zip(&w).map(|(a, b)| a + beta * (a - b)).collect();
        w = next;
        t = t_next;
        if change < 1e-10 {
            break;
        }
    }
    w
}

/// Feature weights after the outer iterations, and whether they converged.
pub fn llbfs_weights(m: &FeatureMatrix, cfg: &LlbfsConfig) -> Result<(Vec<f64>, Vec<f64>, bool), SelectionError> {
    m.check_rankable(2)?;
    let d = m.n_features();
    let (cols, constant) = standardized_columns(m);
    let rows: Vec<Vec<f64>> = (0..m.n_rows()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    let mut w: Vec<f64> = constant.iter().map(|&c| if c { 0.0 } else { 1.0 }).collect();
    let mut converged = false;
    let mut mean_margin = vec![0.0; d];
    for _ in 0..cfg.max_iterations {
        // All-zero weights leave no usable distance; fall back to uniform.
        let metric: Vec<f64> = if w.iter().all(|&x| x == 0.0) {
            constant.iter().map(|&c| if c { 0.0 } else { 1.0 }).collect()
        } else {
            w.clone()
        };
        let z = margins(&rows, &m.labels, &metric, cfg.kernel_width);
        for j in 0..d {
            mean_margin[j] = z.iter().map(|zn| zn[j]).sum::<f64>() / z.len() as f64;
        }
        let next = fit_weights(&z, &w, cfg);
        let change = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        w = next;
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }
    Ok((w, mean_margin, converged))
}

/// Features by descending weight; zero-weight ties go to the larger mean
/// margin. Constant features are last.
pub fn rank_llbfs(m: &FeatureMatrix, cfg: &LlbfsConfig) -> Result<Ranking, SelectionError> {
    let (w, margin, converged) = llbfs_weights(m, cfg)?;
    let (_, constant) = standardized_columns(m);
    let d = w.len();
    let mut order: Vec<usize> = (0..d).filter(|&j| !constant[j]).collect();
    order.sort_by(|&a, &b| {
        w[b].total_cmp(&w[a])
            .then(margin[b].total_cmp(&margin[a]))
            .then(a.cmp(&b))
    });
    let degenerate: Vec<usize> = (0..d).filter(|&j| constant[j]).collect();
    order.extend(&degenerate);
    Ok(Ranking {
        order,
        degenerate,
        converged,
    })
}
