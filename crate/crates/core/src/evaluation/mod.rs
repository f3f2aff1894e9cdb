//! Validation harness: balanced repeated k-fold, leave-one-subject-out,
//! randomized baselines, feature-count sweeps, hypothesis tests and the
//! identity-confounding census.

mod confound;
mod cv;
mod hypothesis;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{ForestConfig, ForestError};
use crate::selection::{SelectionConfig, SelectionError};

pub use confound::{confounding_report, cv_confounding_report, ConfoundingReport};
pub use cv::{
    balanced_kfold_cv, feature_sweep, impute_medians, kfold_cv_counts, loso_cv, random_baseline_cv,
    CvObserver, FoldInfo,
};
pub use hypothesis::{ks_test_2sample, mann_whitney_u, t_test_unpaired, TestKind, TestResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("class {class} has {count} rows, need at least {needed}")]
    TooFewRows {
        class: u8,
        count: usize,
        needed: usize,
    },
    #[error("class {class} has {count} subjects, need at least 2")]
    TooFewSubjects { class: u8, count: usize },
    #[error("subject {0} has recordings in both classes")]
    InconsistentSubject(String),
    #[error("confusion matrix has an empty class")]
    EmptyClass,
    #[error("need at least {needed} samples per group, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn add(&mut self, truth: u8, predicted: u8) {
        match (truth, predicted) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fn_ += 1,
            (_, 0) => self.tn += 1,
            _ => self.fp += 1,
        }
    }
}

/// Sensitivity and specificity in percent.
pub fn metrics(c: &Confusion) -> Result<(f64, f64), EvalError> {
    if c.tp + c.fn_ == 0 || c.tn + c.fp == 0 {
        return Err(EvalError::EmptyClass);
    }
    Ok((
        100.0 * c.tp as f64 / (c.tp + c.fn_) as f64,
        100.0 * c.tn as f64 / (c.tn + c.fp) as f64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    KfoldBalanced,
    Loso,
    RandomBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Rankings are computed on each training fold.
    InFold,
    /// One ranking of the whole matrix is reused by every fold.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k: usize,
    pub repetitions: usize,
    pub n_features: usize,
    pub selection_mode: SelectionMode,
    /// Feature names in rank order for global mode; computed from the
    /// whole matrix when absent.
    pub global_ranking: Option<Vec<String>>,
    pub selection: SelectionConfig,
    pub forest: ForestConfig,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 10,
            repetitions: 100,
            n_features: 10,
            selection_mode: SelectionMode::InFold,
            global_ranking: None,
            selection: SelectionConfig::default(),
            forest: ForestConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub scheme: Scheme,
    pub selection_mode: SelectionMode,
    pub n_features_used: usize,
    pub repetitions: usize,
    /// Folds actually used; below the requested k when the minority class
    /// is smaller than k.
    pub k_used: usize,
    pub k_reduced: bool,
    pub rows_per_class: usize,
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    pub mean_sensitivity: f64,
    pub sd_sensitivity: f64,
    pub mean_specificity: f64,
    pub sd_specificity: f64,
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

impl CvReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        scheme: Scheme,
        selection_mode: SelectionMode,
        n_features_used: usize,
        k_used: usize,
        k_reduced: bool,
        rows_per_class: usize,
        sensitivity: Vec<f64>,
        specificity: Vec<f64>,
    ) -> CvReport {
        let (mean_sensitivity, sd_sensitivity) = mean_sd(&sensitivity);
        let (mean_specificity, sd_specificity) = mean_sd(&specificity);
        CvReport {
            scheme,
            selection_mode,
            n_features_used,
            repetitions: sensitivity.len(),
            k_used,
            k_reduced,
            rows_per_class,
            sensitivity,
            specificity,
            mean_sensitivity,
            sd_sensitivity,
            mean_specificity,
            sd_specificity,
        }
    }
}

/// Summary CSV with one row per labelled report.
pub fn write_summary_csv<W: Write>(out: W, rows: &[(String, &CvReport)]) -> Result<(), EvalError> {
    let io = |e: csv::Error| EvalError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "comparison",
        "scheme",
        "n_features",
        "repetitions",
        "mean_sensitivity",
        "sd_sensitivity",
        "mean_specificity",
        "sd_specificity",
    ])
    .map_err(io)?;
    for (label, r) in rows {
        let scheme = serde_json::to_value(r.scheme)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        w.write_record([
            label.clone(),
            scheme,
            r.n_features_used.to_string(),
            r.repetitions.to_string(),
            format!("{:.2}", r.mean_sensitivity),
            format!("{:.2}", r.sd_sensitivity),
            format!("{:.2}", r.mean_specificity),
            format!("{:.2}", r.sd_specificity),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| EvalError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_arithmetic() {
        let c = |tp, fn_, tn, fp| Confusion { tp, fn_, tn, fp };
        assert_eq!(metrics(&c(10, 0, 10, 0)).unwrap(), (100.0, 100.0));
        assert_eq!(metrics(&c(5, 5, 8, 2)).unwrap(), (50.0, 80.0));
        assert_eq!(metrics(&c(0, 10, 3, 1)).unwrap().0, 0.0);
        assert_eq!(metrics(&c(0, 0, 3, 1)), Err(EvalError::EmptyClass));
    }

    #[test]
    fn report_moments() {
        let r = CvReport::new(
            Scheme::KfoldBalanced,
            SelectionMode::InFold,
            10,
            10,
            false,
            20,
            vec![80.0, 100.0],
            vec![50.0, 50.0],
        );
        assert_eq!(r.mean_sensitivity, 90.0);
        assert!((r.sd_sensitivity - 200f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.sd_specificity, 0.0);
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &[("A vs B".into(), &r)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("A vs B,kfold_balanced,10,2,90.00,14.14,50.00,0.00"));
    }
}
