//! Minimum-redundancy maximum-relevance ranking on equal-frequency bins.

use super::{FeatureMatrix, Ranking, SelectionError};

/// Equal-frequency codes: a value's bin is `floor(below * bins / n)` where
/// `below` counts strictly smaller values, so ties share a bin and any
/// strictly increasing transform leaves the codes unchanged.
pub fn discretize(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    x.iter()
        .map(|v| {
            let below = sorted.partition_point(|s| s < v);
            (below * bins / n).min(bins - 1)
        })
        .collect()
}

/// Plug-in mutual information (nats) between two code sequences.
pub fn mutual_information(a: &[usize], ka: usize, b: &[usize], kb: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0u32; ka * kb];
    let mut pa = vec![0u32; ka];
    let mut pb = vec![0u32; kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * kb + y] += 1;
        pa[x] += 1;
        pb[y] += 1;
    }
    let mut mi = 0.0;
    for x in 0..ka {
        if pa[x] == 0 {
            continue;
        }
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (pa[x] as f64 * pb[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Greedy ordering by relevance minus mean redundancy with the features
/// already chosen. Constant features are placed last.
pub fn rank_mrmr(m: &FeatureMatrix, bins: usize) -> Result<Ranking, SelectionError> {
    m.check_rankable(2)?;
    let bins = bins.max(2);
    let d = m.n_features();
    let labels: Vec<usize> = m.labels.iter().map(|&l| l as usize).collect();
    let codes: Vec<Vec<usize>> = (0..d).map(|j| discretize(&m.column(j), bins)).collect();
    let constant: Vec<bool> = codes.iter().map(|c| c.iter().all(|&v| v == c[0])).collect();
    let relevance: Vec<f64> = codes
        .iter()
        .map(|c| mutual_information(c, bins, &labels, 2))
        .collect();

    let mut remaining: Vec<usize> = (0..d).filter(|&j| !constant[j]).collect();
    let mut redundancy = vec![0.0; d];
    let mut order = Vec::with_capacity(d);
    while !remaining.is_empty() {
        let k = order.len();
        let score = |j: usize| {
            if k == 0 {
                relevance[j]
            } else {
                relevance[j] - redundancy[j] / k as f64
            }
        };
        let mut best = 0;
        for (pos, &j) in remaining.iter().enumerate() {
            if score(j) > score(remaining[best]) + 1e-12 {
                best = pos;
            }
        }
        let chosen = remaining.remove(best);
        order.push(chosen);
        for &j in &remaining {
            redundancy[j] += mutual_information(&codes[j], bins, &codes[chosen], bins);
        }
    }
    let degenerate: Vec<usize> = (0..d).filter(|&j| constant[j]).collect();
    order.extend(&degenerate);
    Ok(Ranking {
        order,
        degenerate,
        converged: true,
    })
}
