//! The 292-measure dysphonia feature vector.
//!
//! Features are computed in blocks (see [`schema::BLOCKS`]). Cycle detection
//! failing aborts extraction; any other failing block is recorded as missing
//! and its values set to NaN.

pub mod mfcc;
pub mod noise;
pub mod nonlinear;
pub mod perturbation;
pub mod schema;
pub mod stats;
pub mod wavelet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{detect_cycles, tkeo, ContourError, CycleContour, PitchConfig};
use crate::corpus::Segment;

pub use mfcc::{mfcc_summaries, MfccConfig};
pub use noise::{gne, hnr, hnr_summary, vfer, GneConfig, HnrConfig};
pub use nonlinear::{dfa, ppe, rpde, DfaConfig, DfaResult, RpdeConfig};
pub use perturbation::{jitter_family, pq_gq, shimmer_family};
pub use schema::{Block, Category, FeatureInfo, FeatureSchema, BLOCKS, REQUIRED_NAMES, SCHEMA_VERSION};
pub use stats::{descriptive_stats, Summary};
pub use wavelet::{wavelet_features, wavelet_tkeo_features, WaveletConfig};

/// Named feature values in schema order for one block.
pub type NamedValues = Vec<(String, f64)>;

pub const N_FEATURES: usize = 292;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("{what}: length {len} is below the minimum {needed}")]
    TooShort {
        what: &'static str,
        len: usize,
        needed: usize,
    },
    #[error("{what}: {found} cycles, need at least {needed}")]
    TooFewCycles {
        what: &'static str,
        found: usize,
        needed: usize,
    },
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("no recurrences found within the maximum recurrence time")]
    NoRecurrences,
    #[error("no frame yielded a periodicity estimate")]
    NoVoicedFrames,
    #[error("sample rate {rate} Hz is below the {needed} Hz this measure needs")]
    InsufficientBandwidth { rate: u32, needed: u32 },
    #[error("cycle detection failed: {0}")]
    ContourFailure(#[from] ContourError),
    #[error("{missing} of {total} features missing, at most {allowed} allowed")]
    TooManyMissing {
        missing: usize,
        total: usize,
        allowed: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub pitch: PitchConfig,
    pub mfcc: MfccConfig,
    pub rpde: RpdeConfig,
    pub dfa: DfaConfig,
    pub hnr: HnrConfig,
    pub gne: GneConfig,
    pub wavelet: WaveletConfig,
    /// Largest tolerated fraction of missing values per vector.
    pub max_missing_fraction: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            pitch: PitchConfig::default(),
            mfcc: MfccConfig::default(),
            rpde: RpdeConfig::default(),
            dfa: DfaConfig::default(),
            hnr: HnrConfig::default(),
            gne: GneConfig::default(),
            wavelet: WaveletConfig::default(),
            max_missing_fraction: 0.05,
        }
    }
}

/// A block that could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockFailure {
    pub block: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVector {
    /// Values in schema order; NaN where missing.
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
    pub failures: Vec<BlockFailure>,
    pub schema_version: String,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FeatureSchema::get().index_of(name).map(|i| self.values[i])
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }
}

fn summary_values(series: &[f64]) -> Result<Vec<f64>, FeatureError> {
    Ok(descriptive_stats(series)?.to_array().to_vec())
}

fn tkeo_summary(series: &[f64]) -> Result<Vec<f64>, FeatureError> {
    let t = tkeo(series).map_err(|_| FeatureError::TooShort {
        what: "teager-kaiser energy",
        len: series.len(),
        needed: 3,
    })?;
    summary_values(&t)
}

fn values(v: NamedValues) -> Vec<f64> {
    v.into_iter().map(|(_, x)| x).collect()
}

fn compute_block(
    block: Block,
    seg: &Segment<'_>,
    contour: &CycleContour,
    cfg: &FeatureConfig,
) -> Result<Vec<f64>, FeatureError> {
    let f0_median = stats::median(&contour.f0_hz);
    match block {
        Block::Descriptive => summary_values(seg.samples),
        Block::Jitter => jitter_family(contour).map(values),
        Block::Shimmer => shimmer_family(contour).map(values),
        Block::TkeoSignal => tkeo_summary(seg.samples),
        Block::TkeoF0 => tkeo_summary(&contour.f0_hz),
        Block::TkeoA0 => tkeo_summary(&contour.a0),
        Block::A0Stats => summary_values(&contour.a0),
        Block::Mfcc => mfcc_summaries(seg, &cfg.mfcc).map(values),
        Block::Rpde => {
            let mut c = cfg.rpde.clone();
            c.f0_hz = c.f0_hz.or(Some(f0_median));
            rpde(seg, &c).map(|v| vec![v])
        }
        Block::Dfa => dfa(seg, &cfg.dfa).map(|d| vec![d.alpha, d.squashed]),
        Block::Ppe => ppe(contour).map(|v| vec![v]),
        Block::Hnr => hnr_summary(seg, &cfg.hnr).map(values),
        Block::Gne => gne(seg, &cfg.gne).map(values),
        Block::Vfer => vfer(seg).map(values),
        Block::PqGq => pq_gq(contour, seg).map(values),
        Block::F0Stats => summary_values(&contour.f0_hz),
        Block::WaveletF0 => wavelet_features(contour, &cfg.wavelet).map(values),
        Block::WaveletTkeo => wavelet_tkeo_features(contour, &cfg.wavelet).map(values),
    }
}

/// Computes the full feature vector of a segment.
pub fn extract_all(seg: &Segment<'_>, cfg: &FeatureConfig) -> Result<FeatureVector, FeatureError> {
    let contour = detect_cycles(seg, &cfg.pitch)?;
    extract_with_contour(seg, &contour, cfg)
}

/// Feature vector from a segment and an already detected contour.
pub fn extract_with_contour(
    seg: &Segment<'_>,
    contour: &CycleContour,
    cfg: &FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    let schema = FeatureSchema::get();
    let mut out = Vec::with_capacity(schema.len());
    let mut missing = Vec::with_capacity(schema.len());
    let mut failures = Vec::new();
    for block in BLOCKS {
        let width = block.feature_names().len();
        let result = compute_block(block, seg, contour, cfg).and_then(|v| {
            debug_assert_eq!(v.len(), width, "{}", block.name());
            if v.iter().all(|x| x.is_finite()) {
                Ok(v)
            } else {
                Err(FeatureError::NonFinite(block.name()))
            }
        });
        match result {
            Ok(v) => {
                out.extend(v);
                missing.extend(std::iter::repeat(false).take(width));
            }
            Err(e) => {
                out.extend(std::iter::repeat(f64::NAN).take(width));
                missing.extend(std::iter::repeat(true).take(width));
                failures.push(BlockFailure {
                    block: block.name(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let n_missing = missing.iter().filter(|m| **m).count();
    let allowed = (cfg.max_missing_fraction * schema.len() as f64).floor() as usize;
    if n_missing > allowed {
        return Err(FeatureError::TooManyMissing {
            missing: n_missing,
            total: schema.len(),
            allowed,
        });
    }
    Ok(FeatureVector {
        values: out,
        missing,
        failures,
        schema_version: SCHEMA_VERSION.to_string(),
    })
}
