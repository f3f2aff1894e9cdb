//! Identity-confounding census: how many subjects share a leaf compared
//! with how many subjects each tree was trained on.

use std::sync::Mutex;

use serde::Serialize;

use super::cv::{balanced_kfold_cv, CvObserver, FoldInfo};
use super::{CvConfig, EvalError};
use crate::forest::{leaf_census, Forest, TreeCensus};
use crate::selection::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfoundingReport {
    pub avg_observations_per_leaf: f64,
    pub avg_subjects_per_leaf: f64,
    pub avg_training_subjects: f64,
    pub subject_fraction: f64,
    pub n_trees: usize,
}

impl ConfoundingReport {
    pub fn from_averages(observations: f64, subjects: f64, training_subjects: f64) -> ConfoundingReport {
        ConfoundingReport {
            avg_observations_per_leaf: observations,
            avg_subjects_per_leaf: subjects,
            avg_training_subjects: training_subjects,
            subject_fraction: if training_subjects > 0.0 { subjects / training_subjects } else { 0.0 },
            n_trees: 0,
        }
    }

    /// Averages over trees, each tree weighted equally.
    pub fn from_census(census: &[TreeCensus]) -> ConfoundingReport {
        let n = census.len().max(1) as f64;
        let avg = |f: fn(&TreeCensus) -> f64| census.iter().map(f).sum::<f64>() / n;
        let mut r = ConfoundingReport::from_averages(
            avg(|c| c.mean_observations_per_leaf),
            avg(|c| c.mean_subjects_per_leaf),
            avg(|c| c.training_subjects as f64),
        );
        r.n_trees = census.len();
        r
    }
}

/// Census of one forest over its training matrix.
pub fn confounding_report(f: &Forest, m: &FeatureMatrix) -> Result<ConfoundingReport, EvalError> {
    Ok(ConfoundingReport::from_census(&leaf_census(f, m)?))
}

struct Collector(Mutex<Result<Vec<TreeCensus>, EvalError>>);

impl CvObserver for Collector {
    fn on_fold(&self, info: &FoldInfo<'_>) {
        let mut guard = self.0.lock().expect("census lock");
        if let Ok(all) = guard.as_mut() {
            match leaf_census(info.forest, info.train_matrix) {
                Ok(c) => all.extend(c),
                Err(e) => *guard = Err(e.into()),
            }
        }
    }
}

/// Census averaged over every tree of every fold of a balanced k-fold run.
pub fn cv_confounding_report(m: &FeatureMatrix, cfg: &CvConfig) -> Result<ConfoundingReport, EvalError> {
    let collector = Collector(Mutex::new(Ok(Vec::new())));
    balanced_kfold_cv(m, cfg, &collector)?;
    let census = collector.0.into_inner().expect("census lock")?;
    Ok(ConfoundingReport::from_census(&census))
}
