//! The versioned 292-measure inventory.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::perturbation::{JITTER_NAMES, PQ_GQ_NAMES, SHIMMER_NAMES};

pub const SCHEMA_VERSION: &str = "phonokit-292/1";

/// Names that must resolve to exactly one position in the vector.
pub const REQUIRED_NAMES: [&str; 25] = [
    "det_entropy_log_6_coef",
    "GNE-SEO",
    "VFER-LF-TKEO",
    "prctile50TKEO_A0",
    "medMFCC3",
    "PQ11.class_Schoentgen",
    "Ed2_8_coef",
    "mode_F0",
    "HNR(1)",
    "medShimmer",
    "medJitter",
    "Q1",
    "Skewness",
    "Mean(A0)",
    "P0",
    "muDiffMFCC5",
    "muDiffMFCC8",
    "muDiffMFCC13",
    "medMFCC10",
    "app_det_TKEO_mean_4_coef",
    "app_entropy_log_8_coef",
    "det_entropy_shannon_6_coef",
    "det_LT_TKEO_mean_4_coef",
    "det_LT_TKEO_mean_8_coef",
    "Ed2_7_coef",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Descriptive,
    VocalFold,
    Cepstral,
    Aeroacoustic,
    Wavelet,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Descriptive => "descriptive",
            Category::VocalFold => "vocal_fold",
            Category::Cepstral => "cepstral",
            Category::Aeroacoustic => "aeroacoustic",
            Category::Wavelet => "wavelet",
        }
    }
}

/// A group of features computed together. A failing block marks all of its
/// features missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Descriptive,
    Jitter,
    Shimmer,
    TkeoSignal,
    TkeoF0,
    TkeoA0,
    A0Stats,
    Mfcc,
    Rpde,
    Dfa,
    Ppe,
    Hnr,
    Gne,
    Vfer,
    PqGq,
    F0Stats,
    WaveletF0,
    WaveletTkeo,
}

/// Blocks in vector order.
pub const BLOCKS: [Block; 18] = [
    Block::Descriptive,
    Block::Jitter,
    Block::Shimmer,
    Block::TkeoSignal,
    Block::TkeoF0,
    Block::TkeoA0,
    Block::A0Stats,
    Block::Mfcc,
    Block::Rpde,
    Block::Dfa,
    Block::Ppe,
    Block::Hnr,
    Block::Gne,
    Block::Vfer,
    Block::PqGq,
    Block::F0Stats,
    Block::WaveletF0,
    Block::WaveletTkeo,
];

pub const DESCRIPTIVE_NAMES: [&str; 13] = [
    "Mean", "Median", "SD", "Skewness", "Kurtosis", "IQR", "Q1", "Q3", "prctile5", "prctile95",
    "Mode", "Min", "Max",
];

pub const MFCC_COEFFS: usize = 13;
pub const WAVELET_LEVELS: usize = 10;

fn tkeo_stat_names(series: &str) -> Vec<String> {
    [
        "mean", "prctile50", "std", "skew", "kurt", "iqr", "prctile25", "prctile75", "prctile5",
        "prctile95", "mode", "min", "max",
    ]
    .iter()
    .map(|s| format!("{s}TKEO_{series}"))
    .collect()
}

fn contour_stat_names(series: &str) -> Vec<String> {
    let mean = if series == "A0" {
        "Mean(A0)".to_string()
    } else {
        format!("mean_{series}")
    };
    let mut out = vec![mean];
    out.extend(
        [
            "median", "std", "skew", "kurt", "iqr", "Q1", "Q3", "prctile5", "prctile95", "mode",
            "min", "max",
        ]
        .iter()
        .map(|s| format!("{s}_{series}")),
    );
    out
}

fn strs(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::Descriptive => "descriptive",
            Block::Jitter => "jitter",
            Block::Shimmer => "shimmer",
            Block::TkeoSignal => "tkeo_signal",
            Block::TkeoF0 => "tkeo_f0",
            Block::TkeoA0 => "tkeo_a0",
            Block::A0Stats => "a0_stats",
            Block::Mfcc => "mfcc",
            Block::Rpde => "rpde",
            Block::Dfa => "dfa",
            Block::Ppe => "ppe",
            Block::Hnr => "hnr",
            Block::Gne => "gne",
            Block::Vfer => "vfer",
            Block::PqGq => "pq_gq",
            Block::F0Stats => "f0_stats",
            Block::WaveletF0 => "wavelet_f0",
            Block::WaveletTkeo => "wavelet_tkeo_f0",
        }
    }

    pub fn category(self) -> Category {
        match self {
            Block::Descriptive => Category::Descriptive,
            Block::Jitter
            | Block::Shimmer
            | Block::TkeoSignal
            | Block::TkeoF0
            | Block::TkeoA0
            | Block::A0Stats => Category::VocalFold,
            Block::Mfcc => Category::Cepstral,
            Block::Rpde
            | Block::Dfa
            | Block::Ppe
            | Block::Hnr
            | Block::Gne
            | Block::Vfer
            | Block::PqGq
            | Block::F0Stats => Category::Aeroacoustic,
            Block::WaveletF0 | Block::WaveletTkeo => Category::Wavelet,
        }
    }

    pub fn feature_names(self) -> Vec<String> {
        match self {
            Block::Descriptive => strs(&DESCRIPTIVE_NAMES),
            Block::Jitter => strs(&JITTER_NAMES),
            Block::Shimmer => strs(&SHIMMER_NAMES),
            Block::TkeoSignal => tkeo_stat_names("sig"),
            Block::TkeoF0 => tkeo_stat_names("F0"),
            Block::TkeoA0 => tkeo_stat_names("A0"),
            Block::A0Stats => contour_stat_names("A0"),
            Block::Mfcc => {
                let mut out = Vec::new();
                for stat in ["medMFCC", "meanMFCC", "stdMFCC", "muDiffMFCC", "stdDiffMFCC"] {
                    out.extend((1..=MFCC_COEFFS).map(|k| format!("{stat}{k}")));
                }
                out.extend(strs(&["meanLogEnergy", "stdLogEnergy", "muDiffLogEnergy"]));
                out
            }
            Block::Rpde => strs(&["RPDE"]),
            Block::Dfa => strs(&["DFA_alpha", "DFA"]),
            Block::Ppe => strs(&["PPE"]),
            Block::Hnr => strs(&["HNR(1)", "HNR_median", "HNR_std"]),
            Block::Gne => {
                let mut out = Vec::new();
                for base in ["GNE", "GNE-SEO", "GNE-TKEO"] {
                    out.push(base.to_string());
                    out.push(format!("{base}_mean"));
                    out.push(format!("{base}_std"));
                }
                out
            }
            Block::Vfer => strs(&[
                "VFER-LF",
                "VFER-HF",
                "VFER-ratio",
                "VFER-LF-TKEO",
                "VFER-HF-TKEO",
                "VFER-ratio-TKEO",
                "VFER-LF-entropy",
                "VFER-HF-entropy",
            ]),
            Block::PqGq => strs(&PQ_GQ_NAMES),
            Block::F0Stats => contour_stat_names("F0"),
            Block::WaveletF0 => {
                let mut out = Vec::new();
                for k in 1..=WAVELET_LEVELS {
                    out.push(format!("det_entropy_log_{k}_coef"));
                    out.push(format!("det_entropy_shannon_{k}_coef"));
                    out.push(format!("Ed2_{k}_coef"));
                    out.push(format!("det_LT_TKEO_mean_{k}_coef"));
                    out.push(format!("app_det_TKEO_mean_{k}_coef"));
                    out.push(format!("app_entropy_log_{k}_coef"));
                }
                out
            }
            Block::WaveletTkeo => {
                let mut out = Vec::new();
                for k in 1..=WAVELET_LEVELS {
                    out.push(format!("TKEO_Ed2_{k}_coef"));
                    out.push(format!("TKEO_det_entropy_log_{k}_coef"));
                    out.push(format!("TKEO_det_entropy_shannon_{k}_coef"));
                    out.push(format!("TKEO_app_entropy_log_{k}_coef"));
                }
                out
            }
        }
    }

    fn describe(self, name: &str) -> String {
        let level = || {
            name.split('_')
                .find_map(|p| p.parse::<usize>().ok())
                .unwrap_or(0)
        };
        match self {
            Block::Descriptive => format!("{name} of the raw signal amplitude"),
            Block::Jitter => format!("{name}: cycle-to-cycle period perturbation"),
            Block::Shimmer => format!("{name}: cycle-to-cycle peak amplitude perturbation"),
            Block::TkeoSignal => format!("{name}: summary of the Teager-Kaiser energy of the signal"),
            Block::TkeoF0 => format!("{name}: summary of the Teager-Kaiser energy of the F0 contour"),
            Block::TkeoA0 => format!("{name}: summary of the Teager-Kaiser energy of the A0 contour"),
            Block::A0Stats => format!("{name}: summary of the per-cycle peak amplitude"),
            Block::F0Stats => format!("{name}: summary of the per-cycle fundamental frequency (Hz)"),
            Block::Mfcc => format!("{name}: mel-frequency cepstral summary"),
            Block::Rpde => "recurrence period density entropy, 0 periodic to 1 stochastic".into(),
            Block::Dfa if name == "DFA" => "detrended fluctuation exponent mapped to (0,1) by the logistic function".into(),
            Block::Dfa => "detrended fluctuation scaling exponent".into(),
            Block::Ppe => "pitch period entropy of the whitened semitone contour".into(),
            Block::Hnr => format!("{name}: autocorrelation harmonics-to-noise ratio (dB) over frames"),
            Block::Gne => format!("{name}: cross-band envelope correlation (glottal to noise excitation)"),
            Block::Vfer => format!("{name}: energy and entropy split of the spectrum at 2.5 kHz"),
            Block::PqGq => format!("{name}: perturbation or glottis quotient"),
            Block::WaveletF0 if name.starts_with("det_LT_TKEO") => format!(
                "signed log1p of the mean Teager-Kaiser energy of the level {} detail coefficients of F0 (LT read as log-transformed)",
                level()
            ),
            Block::WaveletF0 => format!("{name}: level {} db4 decomposition of the F0 contour", level()),
            Block::WaveletTkeo => format!(
                "{name}: level {} db4 decomposition of the Teager-Kaiser energy of F0",
                level()
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureInfo {
    pub name: String,
    pub category: Category,
    pub description: String,
}

/// Ordered feature names with their categories.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    pub features: Vec<FeatureInfo>,
    /// Start offset of each entry of [`BLOCKS`].
    pub block_offsets: Vec<usize>,
}

impl FeatureSchema {
    fn build() -> Self {
        let mut features = Vec::new();
        let mut block_offsets = Vec::new();
        for block in BLOCKS {
            block_offsets.push(features.len());
            for name in block.feature_names() {
                features.push(FeatureInfo {
                    description: block.describe(&name),
                    name,
                    category: block.category(),
                });
            }
        }
        FeatureSchema {
            features,
            block_offsets,
        }
    }

    /// The shared schema instance.
    pub fn get() -> &'static FeatureSchema {
        static SCHEMA: OnceLock<FeatureSchema> = OnceLock::new();
        SCHEMA.get_or_init(FeatureSchema::build)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn category_of(&self, index: usize) -> Category {
        self.features[index].category
    }

    /// JSON list of `{name, category, description}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.features).expect("schema serializes")
    }
}
