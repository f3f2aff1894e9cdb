//! Cross-validation schemes.
//!
//! Every repetition draws from its own stream of the master seed, so runs
//! are reproducible and repetitions can run in parallel. Within a fold,
//! medians for imputation and (in-fold mode) the feature ranking come from
//! the training rows only.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{metrics, Confusion, CvConfig, CvReport, EvalError, Scheme, SelectionMode};
use crate::forest::{randomized_predictions, train_forest, Forest};
use crate::selection::{rank_all, FeatureMatrix, NEGATIVE, POSITIVE};

/// What a fold saw; handed to a [`CvObserver`] after the fold's forest is
/// trained at each feature count.
#[derive(Debug)]
pub struct FoldInfo<'a> {
    pub scheme: Scheme,
    pub repetition: usize,
    pub fold: usize,
    /// Indices into the input matrix.
    pub train_rows: &'a [usize],
    pub test_rows: &'a [usize],
    /// Per-feature imputation medians over the training rows.
    pub medians: &'a [f64],
    /// Full feature ordering the fold used.
    pub ranking: &'a [usize],
    pub n_features: usize,
    /// The imputed training matrix restricted to the selected features.
    pub train_matrix: &'a FeatureMatrix,
    pub forest: &'a Forest,
    pub predictions: &'a [u8],
}

/// Instrumentation hook; `on_fold` may be called from several threads.
pub trait CvObserver: Sync {
    fn on_fold(&self, info: &FoldInfo<'_>);
}

impl CvObserver for () {
    fn on_fold(&self, _: &FoldInfo<'_>) {}
}

/// Medians of each feature over `rows`, ignoring missing values; features
/// missing on every row get 0.
pub fn impute_medians(m: &FeatureMatrix, rows: &[usize]) -> Vec<f64> {
    (0..m.n_features())
        .map(|j| {
            let mut v: Vec<f64> = rows.iter().map(|&r| m.rows[r][j]).filter(|x| !x.is_nan()).collect();
            if v.is_empty() {
                return 0.0;
            }
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                (v[n / 2 - 1] + v[n / 2]) / 2.0
            }
        })
        .collect()
}

fn imputed(m: &FeatureMatrix, rows: &[usize], medians: &[f64]) -> FeatureMatrix {
    let mut sub = m.subset_rows(rows);
    for r in sub.rows.iter_mut() {
        for (v, med) in r.iter_mut().zip(medians) {
            if v.is_nan() {
                *v = *med;
            }
        }
    }
    sub
}

fn rep_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn class_rows(m: &FeatureMatrix) -> (Vec<usize>, Vec<usize>) {
    let pos = (0..m.n_rows()).filter(|&i| m.labels[i] == POSITIVE).collect();
    let neg = (0..m.n_rows()).filter(|&i| m.labels[i] == NEGATIVE).collect();
    (pos, neg)
}

fn check_counts(m: &FeatureMatrix, counts: &[usize]) -> Result<(), EvalError> {
    if counts.is_empty() {
        return Err(EvalError::InvalidConfig("no feature counts requested".into()));
    }
    if let Some(&c) = counts.iter().find(|&&c| c == 0 || c > m.n_features()) {
        return Err(EvalError::InvalidConfig(format!(
            "feature count {c} outside 1..={}",
            m.n_features()
        )));
    }
    Ok(())
}

fn global_ranking(m: &FeatureMatrix, cfg: &CvConfig) -> Result<Option<Vec<usize>>, EvalError> {
    if cfg.selection_mode != SelectionMode::Global {
        return Ok(None);
    }
    if let Some(names) = &cfg.global_ranking {
        let index: HashMap<&str, usize> = m
            .feature_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let order = names
            .iter()
            .map(|n| {
                index
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| EvalError::InvalidConfig(format!("unknown feature {n} in ranking")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Some(order));
    }
    let all: Vec<usize> = (0..m.n_rows()).collect();
    let full = imputed(m, &all, &impute_medians(m, &all));
    Ok(Some(rank_all(&full, &cfg.selection)?.aggregate_order))
}

/// Trains and tests one split at every feature count, adding outcomes to
/// the per-count confusion matrices.
#[allow(clippy::too_many_arguments)]
fn run_split(
    m: &FeatureMatrix,
    cfg: &CvConfig,
    counts: &[usize],
    scheme: Scheme,
    rep: usize,
    fold: usize,
    train: &[usize],
    test: &[usize],
    global: Option<&[usize]>,
    forest_seed: u64,
    confusion: &mut [Confusion],
    obs: &dyn CvObserver,
) -> Result<(), EvalError> {
    let medians = impute_medians(m, train);
    let train_m = imputed(m, train, &medians);
    let test_m = imputed(m, test, &medians);
    let local;
    let ranking: &[usize] = match global {
        Some(g) => g,
        None => {
            local = rank_all(&train_m, &cfg.selection)?.aggregate_order;
            &local
        }
    };
    for (ci, &c) in counts.iter().enumerate() {
        let cols = &ranking[..c];
        let tr = train_m.subset_columns(cols);
        let te = test_m.subset_columns(cols);
        let forest = train_forest(&tr, &cfg.forest, forest_seed)?;
        let predictions = forest.predict_matrix(&te)?;
        for (&truth, &p) in te.labels.iter().zip(&predictions) {
            confusion[ci].add(truth, p);
        }
        obs.on_fold(&FoldInfo {
            scheme,
            repetition: rep,
            fold,
            train_rows: train,
            test_rows: test,
            medians: &medians,
            ranking,
            n_features: c,
            train_matrix: &tr,
            forest: &forest,
            predictions: &predictions,
        });
    }
    Ok(())
}

/// Balanced rows of one repetition split into `k` folds, each class dealt
/// round-robin (the negative class from the last fold backwards) so folds
/// differ in size by at most one.
fn balanced_folds(pos: &[usize], neg: &[usize], per_class: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut p = pos.to_vec();
    let mut n = neg.to_vec();
    p.shuffle(rng);
    n.shuffle(rng);
    p.truncate(per_class);
    n.truncate(per_class);
    let mut folds = vec![Vec::new(); k];
    for (i, &r) in p.iter().enumerate() {
        folds[i % k].push(r);
    }
    for (i, &r) in n.iter().enumerate() {
        folds[k - 1 - i % k].push(r);
    }
    folds
}

fn kfold_plan(m: &FeatureMatrix, k: usize) -> Result<(Vec<usize>, Vec<usize>, usize, usize), EvalError> {
    let (pos, neg) = class_rows(m);
    let per_class = pos.len().min(neg.len());
    if per_class < 2 {
        let (class, count) = if pos.len() < neg.len() { (POSITIVE, pos.len()) } else { (NEGATIVE, neg.len()) };
        return Err(EvalError::TooFewRows {
            class,
            count,
            needed: 2,
        });
    }
    if k < 2 {
        return Err(EvalError::InvalidConfig("k must be at least 2".into()));
    }
    Ok((pos, neg, per_class, k.min(per_class)))
}

/// Balanced repeated k-fold at several feature counts. Each fold ranks
/// once and trains one forest per count on growing prefixes of the same
/// ranking, with the same forest seed.
pub fn kfold_cv_counts(
    m: &FeatureMatrix,
    cfg: &CvConfig,
    counts: &[usize],
    obs: &dyn CvObserver,
) -> Result<Vec<CvReport>, EvalError> {
    check_counts(m, counts)?;
    let (pos, neg, per_class, k) = kfold_plan(m, cfg.k)?;
    let global = global_ranking(m, cfg)?;
    let per_rep: Vec<Vec<(f64, f64)>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(cfg.seed, rep);
            let folds = balanced_folds(&pos, &neg, per_class, k, &mut rng);
            let mut confusion = vec![Confusion::default(); counts.len()];
            for (fi, test) in folds.iter().enumerate() {
                let train: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|&(o, _)| o != fi)
                    .flat_map(|(_, f)| f.iter().copied())
                    .collect();
                let seed = rng.next_u64();
                run_split(
                    m,
                    cfg,
                    counts,
                    Scheme::KfoldBalanced,
                    rep,
                    fi,
                    &train,
                    test,
                    global.as_deref(),
                    seed,
                    &mut confusion,
                    obs,
                )?;
            }
            confusion.iter().map(metrics).collect()
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(ci, &c)| {
            CvReport::new(
                Scheme::KfoldBalanced,
                cfg.selection_mode,
                c,
                k,
                k < cfg.k,
                per_class,
                per_rep.iter().map(|r| r[ci].0).collect(),
                per_rep.iter().map(|r| r[ci].1).collect(),
            )
        })
        .collect())
}

/// Balanced repeated k-fold with `cfg.n_features` selected features.
pub fn balanced_kfold_cv(m: &FeatureMatrix, cfg: &CvConfig, obs: &dyn CvObserver) -> Result<CvReport, EvalError> {
    Ok(kfold_cv_counts(m, cfg, &[cfg.n_features], obs)?.remove(0))
}

/// Balanced k-fold at 2, 4, ..., 30 features.
pub fn feature_sweep(m: &FeatureMatrix, cfg: &CvConfig, obs: &dyn CvObserver) -> Result<Vec<(usize, CvReport)>, EvalError> {
    let counts: Vec<usize> = (1..=15).map(|i| 2 * i).collect();
    let reports = kfold_cv_counts(m, cfg, &counts, obs)?;
    Ok(counts.into_iter().zip(reports).collect())
}

/// Fair-coin predictions on the same balanced folds the k-fold scheme uses.
pub fn random_baseline_cv(m: &FeatureMatrix, cfg: &CvConfig) -> Result<CvReport, EvalError> {
    let (pos, neg, per_class, k) = kfold_plan(m, cfg.k)?;
    let per_rep: Vec<(f64, f64)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(cfg.seed, rep);
            let folds = balanced_folds(&pos, &neg, per_class, k, &mut rng);
            let mut c = Confusion::default();
            for test in &folds {
                let guesses = randomized_predictions(test.len(), rng.next_u64());
                for (&r, &g) in test.iter().zip(&guesses) {
                    c.add(m.labels[r], g);
                }
            }
            metrics(&c)
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(CvReport::new(
        Scheme::RandomBaseline,
        cfg.selection_mode,
        0,
        k,
        k < cfg.k,
        per_class,
        per_rep.iter().map(|r| r.0).collect(),
        per_rep.iter().map(|r| r.1).collect(),
    ))
}

/// Leave-one-subject-out with subject-level balancing: each repetition
/// keeps equally many subjects per class and holds every kept subject out
/// once, with all of its recordings.
pub fn loso_cv(m: &FeatureMatrix, cfg: &CvConfig, obs: &dyn CvObserver) -> Result<CvReport, EvalError> {
    check_counts(m, &[cfg.n_features])?;
    let mut by_subject: BTreeMap<&str, (u8, Vec<usize>)> = BTreeMap::new();
    for (i, s) in m.subject_ids.iter().enumerate() {
        let e = by_subject.entry(s.as_str()).or_insert((m.labels[i], Vec::new()));
        if e.0 != m.labels[i] {
            return Err(EvalError::InconsistentSubject(s.clone()));
        }
        e.1.push(i);
    }
    let subjects: Vec<(u8, Vec<usize>)> = by_subject.into_values().collect();
    let pos: Vec<usize> = (0..subjects.len()).filter(|&s| subjects[s].0 == POSITIVE).collect();
    let neg: Vec<usize> = (0..subjects.len()).filter(|&s| subjects[s].0 == NEGATIVE).collect();
    for (class, group) in [(POSITIVE, &pos), (NEGATIVE, &neg)] {
        if group.len() < 2 {
            return Err(EvalError::TooFewSubjects {
                class,
                count: group.len(),
            });
        }
    }
    let per_class = pos.len().min(neg.len());
    let global = global_ranking(m, cfg)?;
    let counts = [cfg.n_features];
    let per_rep: Vec<(f64, f64)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(cfg.seed, rep);
            let mut p = pos.clone();
            let mut n = neg.clone();
            p.shuffle(&mut rng);
            n.shuffle(&mut rng);
            p.truncate(per_class);
            n.truncate(per_class);
            let mut kept: Vec<usize> = p.into_iter().chain(n).collect();
            kept.sort_unstable();
            let mut confusion = [Confusion::default()];
            for (fi, &held) in kept.iter().enumerate() {
                let test = &subjects[held].1;
                let train: Vec<usize> = kept
                    .iter()
                    .filter(|&&s| s != held)
                    .flat_map(|&s| subjects[s].1.iter().copied())
                    .collect();
                let seed = rng.next_u64();
                run_split(
                    m,
                    cfg,
                    &counts,
                    Scheme::Loso,
                    rep,
                    fi,
                    &train,
                    test,
                    global.as_deref(),
                    seed,
                    &mut confusion,
                    obs,
                )?;
            }
            metrics(&confusion[0])
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(CvReport::new(
        Scheme::Loso,
        cfg.selection_mode,
        cfg.n_features,
        2 * per_class,
        false,
        per_class,
        per_rep.iter().map(|r| r.0).collect(),
        per_rep.iter().map(|r| r.1).collect(),
    ))
}
