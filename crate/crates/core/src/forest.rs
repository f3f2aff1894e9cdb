//! CART random forest for binary labels.
//!
//! Trees split on `x[feature] <= threshold` (left) with thresholds at
//! midpoints between consecutive distinct values. The best split maximizes
//! the Gini decrease, compared in exact integer arithmetic; ties go to the
//! lower feature index, then the lower threshold. Leaf and forest vote ties
//! go to class 0.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::selection::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("training matrix is empty")]
    Empty,
    #[error("expected {expected} features, found {found}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("training matrix contains missing values")]
    MissingValues,
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("forest needs at least one tree")]
    NoTrees,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `floor(sqrt(d))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    /// Nodes with fewer rows than this become leaves.
    pub min_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            mtry: None,
            bootstrap: true,
            min_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class_counts: [usize; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
    /// Training rows drawn for this tree, with repeats.
    pub bootstrap_row_ids: Vec<usize>,
}

impl Tree {
    /// Builds a tree from explicit nodes, checking that it is a binary tree
    /// rooted at node 0 with every node reachable exactly once.
    pub fn from_parts(nodes: Vec<Node>, bootstrap_row_ids: Vec<usize>) -> Result<Tree, ForestError> {
        if nodes.is_empty() {
            return Err(ForestError::InvalidTree("no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= nodes.len() {
                return Err(ForestError::InvalidTree(format!("child index {i} out of range")));
            }
            if seen[i] {
                return Err(ForestError::InvalidTree(format!("node {i} reached twice")));
            }
            seen[i] = true;
            if let Node::Split { left, right, .. } = nodes[i] {
                stack.push(left);
                stack.push(right);
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(ForestError::InvalidTree(format!("node {i} unreachable")));
        }
        Ok(Tree {
            nodes,
            bootstrap_row_ids,
        })
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
                Node::Leaf { .. } => return i,
            }
        }
    }

    /// The majority class of the leaf reached by `x`.
    pub fn vote(&self, x: &[f64]) -> u8 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { class_counts } => u8::from(class_counts[1] > class_counts[0]),
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_trees: usize,
    pub feature_subset_size: usize,
    pub seed: u64,
    pub feature_names: Vec<String>,
}

/// A candidate split scored by `sum over children of sum_k n_k^2 / n_child`,
/// which is larger exactly when the weighted Gini impurity is smaller.
/// Stored as the fraction `num / den` for exact comparison.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(left: [usize; 2], right: [usize; 2]) -> Score {
        let sq = |c: [usize; 2]| (c[0] as u128).pow(2) + (c[1] as u128).pow(2);
        let nl = (left[0] + left[1]) as u128;
        let nr = (right[0] + right[1]) as u128;
        Score {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    fn beats(&self, other: &Score) -> bool {
        self.num * other.den > other.num * self.den
    }
}

/// Best split of `rows` on `feature`, as (score, threshold).
fn best_threshold(m: &FeatureMatrix, rows: &[usize], feature: usize) -> Option<(Score, f64)> {
    let mut vals: Vec<(f64, u8)> = rows.iter().map(|&r| (m.rows[r][feature], m.labels[r])).collect();
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = [0usize; 2];
    for &(_, l) in &vals {
        total[l as usize] += 1;
    }
    let mut left = [0usize; 2];
    let mut best: Option<(Score, f64)> = None;
    for i in 0..vals.len() - 1 {
        left[vals[i].1 as usize] += 1;
        if vals[i].0 == vals[i + 1].0 {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let s = Score::new(left, right);
        if best.as_ref().is_none_or(|(b, _)| s.beats(b)) {
            let mid = vals[i].0 + (vals[i + 1].0 - vals[i].0) / 2.0;
            best = Some((s, mid));
        }
    }
    best
}

/// Exhaustive best split over `features`, lowest feature index winning ties.
pub fn best_split(m: &FeatureMatrix, rows: &[usize], features: &[usize]) -> Option<(usize, f64)> {
    let mut sorted = features.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(Score, usize, f64)> = None;
    for f in sorted {
        if let Some((s, t)) = best_threshold(m, rows, f) {
            if best.as_ref().is_none_or(|(b, _, _)| s.beats(b)) {
                best = Some((s, f, t));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn counts(m: &FeatureMatrix, rows: &[usize]) -> [usize; 2] {
    let mut c = [0usize; 2];
    for &r in rows {
        c[m.labels[r] as usize] += 1;
    }
    c
}

fn grow(m: &FeatureMatrix, rows: Vec<usize>, cfg: &ForestConfig, mtry: usize, rng: &mut ChaCha8Rng) -> Vec<Node> {
    let d = m.n_features();
    let mut nodes = vec![Node::Leaf { class_counts: [0, 0] }];
    let mut stack = vec![(0usize, rows, 0usize)];
    let mut all: Vec<usize> = (0..d).collect();
    while let Some((slot, rows, depth)) = stack.pop() {
        let c = counts(m, &rows);
        let pure = c[0] == 0 || c[1] == 0;
        let capped = cfg.max_depth.is_some_and(|md| depth >= md);
        if pure || capped || rows.len() < cfg.min_split.max(2) {
            nodes[slot] = Node::Leaf { class_counts: c };
            continue;
        }
        // Draw mtry candidates; if none of them varies on this node, keep
        // drawing from the remaining features.
        all.shuffle(rng);
        let mut split = None;
        let mut start = 0;
        while start < d && split.is_none() {
            let end = if start == 0 { mtry.min(d) } else { (start + 1).min(d) };
            split = best_split(m, &rows, &all[..end]);
            start = end;
        }
        let Some((feature, threshold)) = split else {
            nodes[slot] = Node::Leaf { class_counts: c };
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| m.rows[i][feature] <= threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { class_counts: [0, 0] });
        let right = nodes.len();
        nodes.push(Node::Leaf { class_counts: [0, 0] });
        nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        stack.push((right, r, depth + 1));
        stack.push((left, l, depth + 1));
    }
    nodes
}

/// Trains `cfg.n_trees` trees, each from its own random stream of `seed`.
pub fn train_forest(m: &FeatureMatrix, cfg: &ForestConfig, seed: u64) -> Result<Forest, ForestError> {
    if m.n_rows() == 0 || m.n_features() == 0 {
        return Err(ForestError::Empty);
    }
    if cfg.n_trees == 0 {
        return Err(ForestError::NoTrees);
    }
    if m.has_missing() {
        return Err(ForestError::MissingValues);
    }
    let c = counts(m, &(0..m.n_rows()).collect::<Vec<_>>());
    if c[0] == 0 || c[1] == 0 {
        return Err(ForestError::SingleClassInput);
    }
    let d = m.n_features();
    let mtry = cfg.mtry.unwrap_or(((d as f64).sqrt().floor() as usize).max(1)).clamp(1, d);
    let n = m.n_rows();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let nodes = grow(m, rows.clone(), cfg, mtry, &mut rng);
            Tree {
                nodes,
                bootstrap_row_ids: rows,
            }
        })
        .collect();
    Ok(Forest {
        trees,
        n_trees: cfg.n_trees,
        feature_subset_size: mtry,
        seed,
        feature_names: m.feature_names.clone(),
    })
}

impl Forest {
    /// Assembles a forest from prebuilt trees.
    pub fn from_trees(trees: Vec<Tree>, feature_names: Vec<String>, seed: u64) -> Result<Forest, ForestError> {
        if trees.is_empty() {
            return Err(ForestError::NoTrees);
        }
        let d = feature_names.len();
        for t in &trees {
            for n in &t.nodes {
                if let Node::Split { feature, .. } = n {
                    if *feature >= d {
                        return Err(ForestError::FeatureMismatch {
                            expected: d,
                            found: feature + 1,
                        });
                    }
                }
            }
        }
        Ok(Forest {
            n_trees: trees.len(),
            trees,
            feature_subset_size: d,
            seed,
            feature_names,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Majority label and the fraction of trees voting class 1.
    pub fn predict(&self, x: &[f64]) -> Result<(u8, f64), ForestError> {
        if x.len() != self.n_features() {
            return Err(ForestError::FeatureMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        let ones = self.trees.iter().filter(|t| t.vote(x) == 1).count();
        let zeros = self.trees.len() - ones;
        Ok((u8::from(ones > zeros), ones as f64 / self.trees.len() as f64))
    }

    /// Labels for every row of `m`.
    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<u8>, ForestError> {
        m.rows.iter().map(|r| self.predict(r).map(|p| p.0)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest serializes")
    }
}

/// Fair-coin labels, independent of any features.
pub fn randomized_predictions(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect()
}

/// Leaf occupancy of one tree's training sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeCensus {
    pub n_leaves: usize,
    pub mean_observations_per_leaf: f64,
    pub mean_subjects_per_leaf: f64,
    pub training_subjects: usize,
}

/// Routes each tree's bootstrap rows to their leaves and counts, per
/// occupied leaf, the rows and distinct subjects there.
pub fn leaf_census(f: &Forest, m: &FeatureMatrix) -> Result<Vec<TreeCensus>, ForestError> {
    if m.n_features() != f.n_features() {
        return Err(ForestError::FeatureMismatch {
            expected: f.n_features(),
            found: m.n_features(),
        });
    }
    f.trees
        .iter()
        .map(|t| {
            let mut rows: Vec<Vec<usize>> = vec![Vec::new(); t.nodes.len()];
            for &r in &t.bootstrap_row_ids {
                if r >= m.n_rows() {
                    return Err(ForestError::InvalidTree(format!("bootstrap row {r} out of range")));
                }
                rows[t.leaf_index(&m.rows[r])].push(r);
            }
            let occupied: Vec<&Vec<usize>> = rows.iter().filter(|v| !v.is_empty()).collect();
            let k = occupied.len().max(1) as f64;
            let obs = occupied.iter().map(|v| v.len()).sum::<usize>() as f64 / k;
            let subj = occupied
                .iter()
                .map(|v| v.iter().map(|&r| m.subject_ids[r].as_str()).collect::<HashSet<_>>().len())
                .sum::<usize>() as f64
                / k;
            let training: HashSet<&str> = t.bootstrap_row_ids.iter().map(|&r| m.subject_ids[r].as_str()).collect();
            Ok(TreeCensus {
                n_leaves: occupied.len(),
                mean_observations_per_leaf: obs,
                mean_subjects_per_leaf: subj,
                training_subjects: training.len(),
            })
        })
        .collect()
}
