//! Sustained-phonation voice analysis toolkit.
//!
//! The crate covers the whole batch pipeline: reading recordings and cohort
//! manifests, glottal-cycle tracking, the 292-measure dysphonia feature
//! vector, a five-selector feature ranking ensemble with majority voting,
//! a CART random forest, and the validation harness (balanced repeated
//! k-fold, leave-one-subject-out, randomized baselines, hypothesis tests and
//! the identity-confounding leaf census). The [`synth`] module generates
//! phonations with known perturbation parameters for verification.

pub mod contour;
pub mod corpus;
mod dsp;
pub mod evaluation;
pub mod features;
pub mod forest;
pub mod selection;
pub mod synth;

pub use contour::{detect_cycles, tkeo, CycleContour, PitchConfig};
pub use corpus::{
    load_manifest, load_wav, quality_gate, select_segment, GateConfig, GateDecision, Group,
    Recording, Segment, SegmentConfig, Sex,
};
pub use features::{extract_all, FeatureConfig, FeatureSchema, FeatureVector, SCHEMA_VERSION};
pub use forest::{train_forest, Forest, ForestConfig};
pub use selection::{FeatureMatrix, RankingTable};
pub use evaluation::{balanced_kfold_cv, loso_cv, CvConfig, CvReport};
