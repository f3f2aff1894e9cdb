//! ReliefF ranking.

use super::{column_moments, is_constant, FeatureMatrix, Ranking, SelectionError};

/// ReliefF weights: each distinct row, weighted by how often it occurs,
/// moves a feature's weight up by its range-scaled distance to the `k`
/// nearest misses and down by its distance to the `k` nearest hits.
/// Neighbours are L1-nearest in standardized space among the other
/// distinct rows, so duplicating every row leaves the weights unchanged.
pub fn relief_weights(m: &FeatureMatrix, k: usize) -> Result<(Vec<f64>, Vec<bool>), SelectionError> {
    m.check_rankable(2)?;
    let d = m.n_features();
    let (mean, sd) = column_moments(m);
    let constant: Vec<bool> = (0..d).map(|j| is_constant(sd[j], mean[j])).collect();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in &m.rows {
        for j in 0..d {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }

    // Distinct (row, label) pairs with multiplicities.
    let mut idx: Vec<usize> = (0..m.n_rows()).collect();
    let key_cmp = |a: &usize, b: &usize| {
        m.labels[*a].cmp(&m.labels[*b]).then_with(|| {
            m.rows[*a]
                .iter()
                .zip(&m.rows[*b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    };
    idx.sort_by(key_cmp);
    let mut uniq: Vec<(usize, f64)> = Vec::new();
    for &i in &idx {
        match uniq.last_mut() {
            Some((u, w)) if key_cmp(u, &i).is_eq() => *w += 1.0,
            _ => uniq.push((i, 1.0)),
        }
    }
    uniq.sort_by_key(|&(i, _)| i);

    let z: Vec<Vec<f64>> = uniq
        .iter()
        .map(|&(i, _)| {
            (0..d)
                .map(|j| if constant[j] { 0.0 } else { (m.rows[i][j] - mean[j]) / sd[j] })
                .collect()
        })
        .collect();
    let u = uniq.len();
    let mut weights = vec![0.0; d];
    let mut total = 0.0;
    for a in 0..u {
        let (ia, wa) = uniq[a];
        let mut hits: Vec<(f64, usize)> = Vec::new();
        let mut misses: Vec<(f64, usize)> = Vec::new();
        for b in 0..u {
            if a == b {
                continue;
            }
            let dist: f64 = z[a].iter().zip(&z[b]).map(|(x, y)| (x - y).abs()).sum();
            if m.labels[uniq[b].0] == m.labels[ia] {
                hits.push((dist, b));
            } else {
                misses.push((dist, b));
            }
        }
        if hits.is_empty() || misses.is_empty() {
            continue;
        }
        let by_dist = |x: &(f64, usize), y: &(f64, usize)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
        hits.sort_by(by_dist);
        misses.sort_by(by_dist);
        let kh = k.min(hits.len()).max(1);
        let km = k.min(misses.len()).max(1);
        for j in (0..d).filter(|&j| !constant[j]) {
            let range = hi[j] - lo[j];
            let diff = |b: usize| (m.rows[ia][j] - m.rows[uniq[b].0][j]).abs() / range;
            let near_hit: f64 = hits[..kh].iter().map(|&(_, b)| diff(b)).sum::<f64>() / kh as f64;
            let near_miss: f64 = misses[..km].iter().map(|&(_, b)| diff(b)).sum::<f64>() / km as f64;
            weights[j] += wa * (near_miss - near_hit);
        }
        total += wa;
    }
    if total > 0.0 {
        for w in weights.iter_mut() {
            *w /= total;
        }
    }
    Ok((weights, constant))
}

/// Features by descending ReliefF weight; constant features last.
pub fn rank_relief(m: &FeatureMatrix, k: usize) -> Result<Ranking, SelectionError> {
    let (w, constant) = relief_weights(m, k)?;
    let d = w.len();
    let mut order: Vec<usize> = (0..d).filter(|&j| !constant[j]).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    let degenerate: Vec<usize> = (0..d).filter(|&j| constant[j]).collect();
    order.extend(&degenerate);
    Ok(Ranking {
        order,
        degenerate,
        converged: true,
    })
}
