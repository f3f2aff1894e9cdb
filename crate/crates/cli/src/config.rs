//! Pipeline configuration: a TOML document with every key optional,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use phonokit::corpus::Group;
use phonokit::evaluation::{CvConfig, SelectionMode};
use phonokit::selection::SelectionConfig;
use phonokit::{FeatureConfig, ForestConfig, GateConfig, SegmentConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    Kfold,
    Loso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SelectionModeArg {
    InFold,
    Global,
}

impl From<SelectionModeArg> for SelectionMode {
    fn from(m: SelectionModeArg) -> Self {
        match m {
            SelectionModeArg::InFold => SelectionMode::InFold,
            SelectionModeArg::Global => SelectionMode::Global,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub scheme: SchemeArg,
    pub k: usize,
    pub repetitions: usize,
    pub n_features: usize,
    pub selection_mode: SelectionModeArg,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection {
            scheme: SchemeArg::Kfold,
            k: 10,
            repetitions: 100,
            n_features: 10,
            selection_mode: SelectionModeArg::InFold,
        }
    }
}

/// One synthetic group: recordings draw F0 evenly across the range, one
/// subject per `recordings_per_subject` recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthGroup {
    pub label: String,
    pub n_recordings: usize,
    pub jitter_pct: f64,
    pub shimmer_pct: f64,
    pub hnr_db: f64,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub sex: String,
}

impl Default for SynthGroup {
    fn default() -> Self {
        SynthGroup {
            label: "IPD".into(),
            n_recordings: 20,
            jitter_pct: 0.3,
            shimmer_pct: 3.0,
            hnr_db: 20.0,
            f0_min_hz: 100.0,
            f0_max_hz: 200.0,
            sex: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthCohort {
    pub recordings_per_subject: usize,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub groups: Vec<SynthGroup>,
}

impl Default for SynthCohort {
    fn default() -> Self {
        SynthCohort {
            recordings_per_subject: 2,
            duration_s: 3.0,
            sample_rate_hz: 44_100,
            groups: vec![
                SynthGroup {
                    label: "LRRK2_PD".into(),
                    jitter_pct: 3.0,
                    ..SynthGroup::default()
                },
                SynthGroup::default(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub audio_root: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub comparison: Option<String>,
    pub sex: Option<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub cv: CvSection,
    pub forest: ForestConfig,
    pub selection: SelectionConfig,
    pub extraction: FeatureConfig,
    pub segment: SegmentConfig,
    pub gate: GateConfig,
    pub synth: SynthCohort,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: None,
            audio_root: None,
            features: None,
            comparison: None,
            sex: None,
            out: PathBuf::from("phonokit-out"),
            seed: 0,
            cv: CvSection::default(),
            forest: ForestConfig::default(),
            selection: SelectionConfig::default(),
            extraction: FeatureConfig::default(),
            segment: SegmentConfig::default(),
            gate: GateConfig::default(),
            synth: SynthCohort::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            k: self.cv.k,
            repetitions: self.cv.repetitions,
            n_features: self.cv.n_features,
            selection_mode: self.cv.selection_mode.into(),
            global_ranking: None,
            selection: self.selection.clone(),
            forest: self.forest.clone(),
            seed: self.seed,
        }
    }

    pub fn validate_cv(&self) -> Result<()> {
        let n = phonokit::features::N_FEATURES;
        if self.cv.n_features == 0 || self.cv.n_features > n {
            return Err(CliError::Validation(format!("n_features must be in 1..={n}, got {}", self.cv.n_features)));
        }
        if self.cv.k < 2 {
            return Err(CliError::Validation(format!("k must be at least 2, got {}", self.cv.k)));
        }
        if self.cv.repetitions == 0 {
            return Err(CliError::Validation("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn comparison(&self) -> Result<Comparison> {
        let text = self
            .comparison
            .as_deref()
            .ok_or_else(|| CliError::Validation("--comparison A:B is required".into()))?;
        Comparison::parse(text)
    }
}

/// Ordered pair of group sets; the first side is the positive class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Comparison {
    pub positive: Vec<Group>,
    pub negative: Vec<Group>,
}

impl Comparison {
    pub fn parse(text: &str) -> Result<Comparison> {
        let (a, b) = text
            .split_once(':')
            .ok_or_else(|| CliError::Validation(format!("comparison `{text}` is not of the form A:B")))?;
        let side = |s: &str| -> Result<Vec<Group>> {
            let mut groups = Vec::new();
            for part in s.split('+') {
                let g: Group = part.parse().map_err(|e: phonokit::corpus::ParseGroupError| CliError::Validation(e.to_string()))?;
                if !groups.contains(&g) {
                    groups.push(g);
                }
            }
            Ok(groups)
        };
        let c = Comparison {
            positive: side(a)?,
            negative: side(b)?,
        };
        if c.positive.iter().any(|g| c.negative.contains(g)) {
            return Err(CliError::Validation(format!("comparison `{text}` has a group on both sides")));
        }
        Ok(c)
    }

    /// 1 for the positive side, 0 for the negative side, `None` otherwise.
    pub fn label(&self, g: Group) -> Option<u8> {
        if self.positive.contains(&g) {
            Some(1)
        } else if self.negative.contains(&g) {
            Some(0)
        } else {
            None
        }
    }

    pub fn name(&self) -> String {
        let join = |v: &[Group]| v.iter().map(|g| g.as_str()).collect::<Vec<_>>().join("+");
        format!("{} vs {}", join(&self.positive), join(&self.negative))
    }
}
