use std::collections::BTreeSet;

use phonokit::forest::*;
use phonokit::selection::FeatureMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn matrix(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> FeatureMatrix {
    let n = rows.len();
    let d = rows[0].len();
    FeatureMatrix::new(
        rows,
        labels,
        (0..n).map(|i| format!("s{i}")).collect(),
        (0..d).map(|j| format!("f{j}")).collect(),
    )
    .unwrap()
}

fn noise(n: usize, d: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
    matrix(rows, (0..n).map(|i| (i % 2) as u8).collect())
}

/// Weighted Gini impurity of every midpoint split, searched exhaustively.
fn brute_force(m: &FeatureMatrix) -> Option<(usize, f64)> {
    let n = m.n_rows();
    let gini = |idx: &[usize]| {
        let p = idx.iter().filter(|&&i| m.labels[i] == 1).count() as f64 / idx.len() as f64;
        2.0 * p * (1.0 - p)
    };
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..m.n_features() {
        let mut v = m.column(f);
        v.sort_by(f64::total_cmp);
        v.dedup();
        for w in v.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| m.rows[i][f] <= t);
            let imp = l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r);
            if best.is_none_or(|(b, _, _)| imp < b - 1e-9) {
                best = Some((imp, f, t));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[test]
fn bootstrap_keeps_about_63_percent_of_rows() {
    let m = noise(1000, 2, 1);
    let f = train_forest(&m, &ForestConfig { n_trees: 40, ..ForestConfig::default() }, 3).unwrap();
    let mean = f
        .trees
        .iter()
        .map(|t| t.bootstrap_row_ids.iter().collect::<BTreeSet<_>>().len() as f64 / 1000.0)
        .sum::<f64>()
        / 40.0;
    assert!((mean - 0.632).abs() < 0.03, "{mean}");
}

#[test]
fn noise_labels_predict_at_chance() {
    let train = noise(200, 5, 7);
    let test = noise(400, 5, 8);
    let f = train_forest(&train, &ForestConfig { n_trees: 100, ..ForestConfig::default() }, 1).unwrap();
    let pred = f.predict_matrix(&test).unwrap();
    let acc = pred.iter().zip(&test.labels).filter(|(a, b)| a == b).count() as f64 / 400.0;
    assert!((acc - 0.5).abs() < 0.1, "{acc}");
}

#[test]
fn default_mtry_is_floor_sqrt_d() {
    let m = noise(20, 30, 2);
    let f = train_forest(&m, &ForestConfig { n_trees: 3, ..ForestConfig::default() }, 0).unwrap();
    assert_eq!(f.feature_subset_size, 5);
    assert_eq!(f.n_features(), 30);
}

#[test]
fn predict_rejects_wrong_width_and_missing_values() {
    let m = noise(20, 3, 2);
    let f = train_forest(&m, &ForestConfig { n_trees: 5, ..ForestConfig::default() }, 0).unwrap();
    assert!(matches!(f.predict(&[0.0, 1.0]), Err(ForestError::FeatureMismatch { expected: 3, found: 2 })));
    let mut bad = m.clone();
    bad.rows[0][0] = f64::NAN;
    assert_eq!(train_forest(&bad, &ForestConfig::default(), 0).unwrap_err(), ForestError::MissingValues);
}

#[test]
fn census_counts_bootstrap_draws_and_subjects() {
    // Single leaf over rows 0 0 1 2 with subjects a a b.
    let m = FeatureMatrix::new(
        vec![vec![0.0], vec![1.0], vec![2.0]],
        vec![0, 1, 1],
        vec!["a".into(), "a".into(), "b".into()],
        vec!["x".into()],
    )
    .unwrap();
    let t = Tree::from_parts(vec![Node::Leaf { class_counts: [2, 2] }], vec![0, 0, 1, 2]).unwrap();
    let f = Forest::from_trees(vec![t], vec!["x".into()], 0).unwrap();
    let c = leaf_census(&f, &m).unwrap();
    assert_eq!(c[0].n_leaves, 1);
    assert_eq!(c[0].mean_observations_per_leaf, 4.0);
    assert_eq!(c[0].mean_subjects_per_leaf, 2.0);
    assert_eq!(c[0].training_subjects, 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn first_split_matches_exhaustive_gini(
        vals in proptest::collection::vec(0u8..6, 24),
        labels in proptest::collection::vec(0u8..2, 8),
    ) {
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let rows: Vec<Vec<f64>> = vals.chunks(3).map(|c| c.iter().map(|&v| v as f64).collect()).collect();
        let m = matrix(rows, labels);
        prop_assume!((0..3).any(|f| m.column(f).iter().any(|v| *v != m.rows[0][f])));
        let cfg = ForestConfig { n_trees: 1, mtry: Some(3), bootstrap: false, ..ForestConfig::default() };
        let f = train_forest(&m, &cfg, 0).unwrap();
        let root = match &f.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        };
        prop_assert_eq!(root, brute_force(&m));
        prop_assert_eq!(best_split(&m, &(0..8).collect::<Vec<_>>(), &[2, 0, 1]), brute_force(&m));
    }

    #[test]
    fn trees_fit_training_data_without_bootstrap(seed in 0u64..500) {
        let m = noise(30, 4, seed);
        let cfg = ForestConfig { n_trees: 1, bootstrap: false, mtry: Some(4), ..ForestConfig::default() };
        let f = train_forest(&m, &cfg, seed).unwrap();
        prop_assert_eq!(f.predict_matrix(&m).unwrap(), m.labels.clone());
    }

    #[test]
    fn forests_are_reproducible(seed in 0u64..1000) {
        let m = noise(24, 6, 5);
        let cfg = ForestConfig { n_trees: 8, ..ForestConfig::default() };
        let a = train_forest(&m, &cfg, seed).unwrap();
        let b = train_forest(&m, &cfg, seed).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        for row in &m.rows {
            let (_, frac) = a.predict(row).unwrap();
            prop_assert!((0.0..=1.0).contains(&frac));
        }
    }
}
