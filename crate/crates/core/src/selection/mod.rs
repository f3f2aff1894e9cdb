//! Five feature rankers and their majority-vote aggregate.

mod gso;
mod lasso;
mod llbfs;
mod mrmr;
mod relief;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gso::rank_gso;
pub use lasso::{lasso_path, rank_lasso, LassoConfig, LassoPath};
pub use llbfs::{llbfs_weights, rank_llbfs, LlbfsConfig};
pub use mrmr::{discretize, mutual_information, rank_mrmr};
pub use relief::{rank_relief, relief_weights};

pub const POSITIVE: u8 = 1;
pub const NEGATIVE: u8 = 0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("matrix has {rows} rows but {other} {what}")]
    ShapeMismatch {
        rows: usize,
        other: usize,
        what: &'static str,
    },
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(u8),
    #[error("class {class} has {count} rows, need at least {needed}")]
    TooFewRows {
        class: u8,
        count: usize,
        needed: usize,
    },
    #[error("value at row {row}, feature {col} is infinite")]
    InfiniteValue { row: usize, col: usize },
    #[error("matrix contains missing values; impute before ranking")]
    MissingValues,
    #[error("rankings do not cover the same feature set")]
    MismatchedFeatureSets,
    #[error("i/o error: {0}")]
    Io(String),
}

/// Recordings by features with binary labels. Missing values are NaN and
/// must be imputed before ranking or training.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub subject_ids: Vec<String>,
    pub feature_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        subject_ids: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self, SelectionError> {
        let n = rows.len();
        if labels.len() != n {
            return Err(SelectionError::ShapeMismatch {
                rows: n,
                other: labels.len(),
                what: "labels",
            });
        }
        if subject_ids.len() != n {
            return Err(SelectionError::ShapeMismatch {
                rows: n,
                other: subject_ids.len(),
                what: "subject ids",
            });
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != feature_names.len() {
                return Err(SelectionError::ShapeMismatch {
                    rows: n,
                    other: r.len(),
                    what: "values in a row versus feature names",
                });
            }
            if let Some(col) = r.iter().position(|v| v.is_infinite()) {
                return Err(SelectionError::InfiniteValue { row: i, col });
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(SelectionError::NonBinaryLabel(l));
        }
        Ok(FeatureMatrix {
            rows,
            labels,
            subject_ids,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn class_count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().any(|r| r.iter().any(|v| v.is_nan()))
    }

    /// Rows at `idx`, in that order.
    pub fn subset_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            subject_ids: idx.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Columns at `cols`, in that order.
    pub fn subset_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| cols.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            subject_ids: self.subject_ids.clone(),
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
        }
    }

    /// Checks the preconditions shared by all rankers.
    pub fn check_rankable(&self, min_per_class: usize) -> Result<(), SelectionError> {
        if self.has_missing() {
            return Err(SelectionError::MissingValues);
        }
        for class in [NEGATIVE, POSITIVE] {
            let count = self.class_count(class);
            if count < min_per_class {
                return Err(SelectionError::TooFewRows {
                    class,
                    count,
                    needed: min_per_class,
                });
            }
        }
        Ok(())
    }
}

/// Column means and sample standard deviations.
pub(crate) fn column_moments(m: &FeatureMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.n_rows() as f64;
    let d = m.n_features();
    let mut mean = vec![0.0; d];
    for r in &m.rows {
        for (a, v) in mean.iter_mut().zip(r) {
            *a += v;
        }
    }
    for a in mean.iter_mut() {
        *a /= n;
    }
    let mut var = vec![0.0; d];
    for r in &m.rows {
        for j in 0..d {
            var[j] += (r[j] - mean[j]).powi(2);
        }
    }
    let sd = var.iter().map(|v| (v / (n - 1.0).max(1.0)).sqrt()).collect();
    (mean, sd)
}

/// True for columns whose spread is negligible relative to their magnitude.
pub(crate) fn is_constant(sd: f64, mean: f64) -> bool {
    sd <= 1e-12 * mean.abs().max(1e-300) || sd == 0.0
}

/// Standardized columns (`d` vectors of length `n`); constant columns are
/// zero and reported in the second return value.
pub(crate) fn standardized_columns(m: &FeatureMatrix) -> (Vec<Vec<f64>>, Vec<bool>) {
    let (mean, sd) = column_moments(m);
    let mut constant = vec![false; m.n_features()];
    let cols = (0..m.n_features())
        .map(|j| {
            if is_constant(sd[j], mean[j]) {
                constant[j] = true;
                vec![0.0; m.n_rows()]
            } else {
                m.rows.iter().map(|r| (r[j] - mean[j]) / sd[j]).collect()
            }
        })
        .collect();
    (cols, constant)
}

/// Centred ±1 coding of the labels.
pub(crate) fn centred_targets(m: &FeatureMatrix) -> Vec<f64> {
    let y: Vec<f64> = m.labels.iter().map(|&l| if l == POSITIVE { 1.0 } else { -1.0 }).collect();
    let mu = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| v - mu).collect()
}

/// A ranker's output: a full ordering of feature indices, best first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub order: Vec<usize>,
    /// Features ranked last because they carry no usable variation.
    pub degenerate: Vec<usize>,
    /// False when an iterative ranker stopped at its iteration cap.
    pub converged: bool,
}

impl Ranking {
    pub fn is_permutation(&self, d: usize) -> bool {
        is_permutation(&self.order, d)
    }
}

pub fn is_permutation(order: &[usize], d: usize) -> bool {
    if order.len() != d {
        return false;
    }
    let mut seen = vec![false; d];
    for &i in order {
        if i >= d || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Mrmr,
    Gso,
    Relief,
    Llbfs,
    Lasso,
}

impl Selector {
    pub const ALL: [Selector; 5] = [
        Selector::Mrmr,
        Selector::Gso,
        Selector::Relief,
        Selector::Llbfs,
        Selector::Lasso,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Selector::Mrmr => "mrmr",
            Selector::Gso => "gso",
            Selector::Relief => "relief",
            Selector::Llbfs => "llbfs",
            Selector::Lasso => "lasso",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub top_m: usize,
    pub mrmr_bins: usize,
    pub relief_k: usize,
    pub llbfs: LlbfsConfig,
    pub lasso: LassoConfig,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            top_m: 30,
            mrmr_bins: 10,
            relief_k: 3,
            llbfs: LlbfsConfig::default(),
            lasso: LassoConfig::default(),
        }
    }
}

/// Per-selector ranks plus the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingTable {
    pub feature_names: Vec<String>,
    /// `selector_ranks[s][f]` is the 1-based rank of feature `f` under
    /// selector `s` (order of [`Selector::ALL`]).
    pub selector_ranks: Vec<Vec<usize>>,
    /// Feature indices, best first.
    pub aggregate_order: Vec<usize>,
    /// 1-based aggregate rank per feature.
    pub aggregate_rank: Vec<usize>,
    pub vote_counts: Vec<usize>,
    pub top_m: usize,
}

impl RankingTable {
    pub fn top(&self, n: usize) -> &[usize] {
        &self.aggregate_order[..n.min(self.aggregate_order.len())]
    }

    /// CSV with one row per feature in aggregate order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SelectionError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| SelectionError::Io(e.to_string());
        w.write_record([
            "feature_name",
            "rank_mrmr",
            "rank_gso",
            "rank_relief",
            "rank_llbfs",
            "rank_lasso",
            "vote_count",
            "aggregate_rank",
        ])
        .map_err(io)?;
        for &f in &self.aggregate_order {
            let mut rec = vec![self.feature_names[f].clone()];
            rec.extend(self.selector_ranks.iter().map(|r| r[f].to_string()));
            rec.push(self.vote_counts[f].to_string());
            rec.push(self.aggregate_rank[f].to_string());
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| SelectionError::Io(e.to_string()))
    }
}

/// Aggregates orderings by counting top-`top_m` memberships; ties go to the
/// lower mean rank, then the lexicographically smaller name.
pub fn majority_vote(
    orders: &[Vec<usize>],
    feature_names: &[String],
    top_m: usize,
) -> Result<RankingTable, SelectionError> {
    let d = feature_names.len();
    if orders.is_empty() || orders.iter().any(|o| !is_permutation(o, d)) {
        return Err(SelectionError::MismatchedFeatureSets);
    }
    let ranks: Vec<Vec<usize>> = orders
        .iter()
        .map(|o| {
            let mut r = vec![0; d];
            for (pos, &f) in o.iter().enumerate() {
                r[f] = pos + 1;
            }
            r
        })
        .collect();
    let votes: Vec<usize> = (0..d)
        .map(|f| ranks.iter().filter(|r| r[f] <= top_m).count())
        .collect();
    // Rank sums compare exactly where float means could tie spuriously.
    let rank_sum: Vec<usize> = (0..d).map(|f| ranks.iter().map(|r| r[f]).sum()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        votes[b]
            .cmp(&votes[a])
            .then(rank_sum[a].cmp(&rank_sum[b]))
            .then(feature_names[a].cmp(&feature_names[b]))
    });
    let mut aggregate_rank = vec![0; d];
    for (pos, &f) in order.iter().enumerate() {
        aggregate_rank[f] = pos + 1;
    }
    Ok(RankingTable {
        feature_names: feature_names.to_vec(),
        selector_ranks: ranks,
        aggregate_order: order,
        aggregate_rank,
        vote_counts: votes,
        top_m,
    })
}

/// Rankings of all five selectors.
pub fn rank_each(m: &FeatureMatrix, cfg: &SelectionConfig) -> Result<Vec<Ranking>, SelectionError> {
    Ok(vec![
        rank_mrmr(m, cfg.mrmr_bins)?,
        rank_gso(m)?,
        rank_relief(m, cfg.relief_k)?,
        rank_llbfs(m, &cfg.llbfs)?,
        rank_lasso(m, &cfg.lasso)?,
    ])
}

/// Runs the five selectors and aggregates them.
pub fn rank_all(m: &FeatureMatrix, cfg: &SelectionConfig) -> Result<RankingTable, SelectionError> {
    let orders: Vec<Vec<usize>> = rank_each(m, cfg)?.into_iter().map(|r| r.order).collect();
    majority_vote(&orders, &m.feature_names, cfg.top_m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i:02}")).collect()
    }

    #[test]
    fn unanimous_orders_pass_through() {
        let o = vec![3, 1, 0, 2, 4];
        let t = majority_vote(&vec![o.clone(); 5], &names(5), 2).unwrap();
        assert_eq!(t.aggregate_order, o);
    }

    #[test]
    fn more_votes_win() {
        // Feature 0 is in the top 2 of three selectors, feature 1 of two.
        let orders = vec![
            vec![0, 2, 1, 3],
            vec![0, 3, 1, 2],
            vec![0, 2, 3, 1],
            vec![1, 2, 3, 0],
            vec![1, 3, 2, 0],
        ];
        let t = majority_vote(&orders, &names(4), 2).unwrap();
        assert_eq!(t.vote_counts[0], 3);
        assert_eq!(t.vote_counts[1], 2);
        assert!(t.aggregate_rank[0] < t.aggregate_rank[1]);
    }

    #[test]
    fn ties_fall_back_to_name() {
        let n = vec!["zeta".to_string(), "alpha".to_string()];
        let orders = vec![vec![0, 1], vec![1, 0]];
        let t = majority_vote(&orders, &n, 1).unwrap();
        assert_eq!(t.aggregate_order, vec![1, 0]);
    }

    #[test]
    fn rejects_non_permutations() {
        assert_eq!(
            majority_vote(&[vec![0, 0, 1]], &names(3), 1),
            Err(SelectionError::MismatchedFeatureSets)
        );
        assert_eq!(
            majority_vote(&[vec![0, 1]], &names(3), 1),
            Err(SelectionError::MismatchedFeatureSets)
        );
    }

    #[test]
    fn csv_has_one_row_per_feature() {
        let t = majority_vote(&vec![vec![2, 0, 1]; 5], &names(3), 2).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("feature_name,rank_mrmr"));
        assert!(lines[1].starts_with("f02,1,1,1,1,1,5,1"));
    }
}
