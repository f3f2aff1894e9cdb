//! Gram-Schmidt orthogonalization ranking.

use super::{centred_targets, standardized_columns, FeatureMatrix, Ranking, SelectionError};

const RESIDUAL_FLOOR: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Repeatedly picks the feature whose residual has the largest squared
/// cosine with the centred ±1 target, then projects it out of the others.
/// Features whose residual energy falls below 1e-10 of their original
/// energy are ranked last, ordered by their initial squared cosine.
pub fn rank_gso(m: &FeatureMatrix) -> Result<Ranking, SelectionError> {
    m.check_rankable(2)?;
    let d = m.n_features();
    let (mut cols, constant) = standardized_columns(m);
    let y = centred_targets(m);
    let yy = dot(&y, &y).max(f64::MIN_POSITIVE);
    let base: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    let initial: Vec<f64> = cols
        .iter()
        .zip(&base)
        .map(|(c, &e)| if e > 0.0 { dot(c, &y).powi(2) / (e * yy) } else { 0.0 })
        .collect();

    let mut alive: Vec<usize> = (0..d).filter(|&j| !constant[j]).collect();
    let mut dead: Vec<usize> = (0..d).filter(|&j| constant[j]).collect();
    let mut order = Vec::with_capacity(d);
    loop {
        alive.retain(|&j| {
            let keep = dot(&cols[j], &cols[j]) > RESIDUAL_FLOOR * base[j];
            if !keep {
                dead.push(j);
            }
            keep
        });
        if alive.is_empty() {
            break;
        }
        let score = |j: usize| dot(&cols[j], &y).powi(2) / (dot(&cols[j], &cols[j]) * yy);
        let mut best = 0;
        let mut best_score = score(alive[0]);
        for (pos, &j) in alive.iter().enumerate().skip(1) {
            let s = score(j);
            if s > best_score + 1e-12 {
                best = pos;
                best_score = s;
            }
        }
        let chosen = alive.remove(best);
        order.push(chosen);
        let norm = dot(&cols[chosen], &cols[chosen]).sqrt();
        let q: Vec<f64> = cols[chosen].iter().map(|v| v / norm).collect();
        for &j in &alive {
            let p = dot(&cols[j], &q);
            for (v, qi) in cols[j].iter_mut().zip(&q) {
                *v -= p * qi;
            }
        }
    }
    dead.sort_by(|&a, &b| initial[b].total_cmp(&initial[a]).then(a.cmp(&b)));
    order.extend(&dead);
    Ok(Ranking {
        order,
        degenerate: dead,
        converged: true,
    })
}
