//! Recordings, cohort manifests, usable-segment selection and the quality gate.

mod manifest;
mod segment;
mod wav;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{load_manifest, read_manifest, LoadFailure, Manifest, ManifestLoad, ManifestRow};
pub use segment::{
    quality_gate, select_segment, GateConfig, GateDecision, RejectReason, SegmentConfig,
};
pub use wav::{load_wav, read_wav, write_wav_pcm16, WavInfo};

/// Lowest sample rate a [`Recording`] may carry.
pub const MIN_SAMPLE_RATE_HZ: u32 = 8000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding (format tag {format:#06x}, {bits} bits)")]
    UnsupportedEncoding { format: u16, bits: u16 },
    #[error("WAV file contains no audio frames")]
    EmptyAudio,
    #[error("sample rate {0} Hz is below the supported minimum of 8000 Hz")]
    InvalidSampleRate(u32),
    #[error("non-finite sample at frame {0}")]
    NonFiniteSample(usize),
    #[error("manifest is missing required column `{0}`")]
    MissingColumn(String),
    #[error("manifest row {row}: unknown group label `{label}`")]
    UnknownGroupLabel { row: usize, label: String },
    #[error("manifest row {row}: duplicate recording path `{path}`")]
    DuplicateRecordingPath { row: usize, path: String },
    #[error("manifest row {row}: invalid value `{value}` in column `{column}`")]
    InvalidField {
        row: usize,
        column: String,
        value: String,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("no usable phonation segment found")]
    NoUsableSegment,
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Clinical group label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Group {
    #[serde(rename = "LRRK2_PD")]
    Lrrk2Pd,
    Ipd,
    Nmc,
    Rnc,
    Control,
}

impl Group {
    pub const ALL: [Group; 5] = [
        Group::Lrrk2Pd,
        Group::Ipd,
        Group::Nmc,
        Group::Rnc,
        Group::Control,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Lrrk2Pd => "LRRK2_PD",
            Group::Ipd => "IPD",
            Group::Nmc => "NMC",
            Group::Rnc => "RNC",
            Group::Control => "CONTROL",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown group label `{0}`")]
pub struct ParseGroupError(pub String);

impl FromStr for Group {
    type Err = ParseGroupError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', ' '], "_");
        match norm.as_str() {
            "LRRK2_PD" | "LRRK2PD" => Ok(Group::Lrrk2Pd),
            "IPD" => Ok(Group::Ipd),
            "NMC" => Ok(Group::Nmc),
            "RNC" => Ok(Group::Rnc),
            "CONTROL" | "HC" | "HEALTHY" => Ok(Group::Control),
            _ => Err(ParseGroupError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
    #[default]
    Unknown,
}

impl Sex {
    pub fn parse(s: &str) -> Option<Sex> {
        match s.trim().to_ascii_uppercase().as_str() {
            "F" | "FEMALE" => Some(Sex::F),
            "M" | "MALE" => Some(Sex::M),
            "" | "U" | "UNKNOWN" | "NA" => Some(Sex::Unknown),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::F => "F",
            Sex::M => "M",
            Sex::Unknown => "unknown",
        }
    }
}

/// A mono recording plus the cohort metadata joined from a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub subject_id: String,
    /// Unset until the recording is joined with a manifest row.
    pub group: Option<Group>,
    pub sex: Sex,
    pub age: Option<f64>,
    pub updrs3: Option<f64>,
    pub disease_duration: Option<f64>,
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Recording {
    /// Builds a recording without metadata, validating the signal invariants.
    pub fn new(id: impl Into<String>, samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(CorpusError::EmptyAudio);
        }
        if sample_rate_hz < MIN_SAMPLE_RATE_HZ {
            return Err(CorpusError::InvalidSampleRate(sample_rate_hz));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(CorpusError::NonFiniteSample(i));
        }
        Ok(Recording {
            id: id.into(),
            subject_id: String::new(),
            group: None,
            sex: Sex::Unknown,
            age: None,
            updrs3: None,
            disease_duration: None,
            samples,
            sample_rate_hz,
        })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// The whole recording as a segment.
    pub fn as_segment(&self) -> Segment<'_> {
        Segment {
            recording_id: &self.id,
            start_sample: 0,
            end_sample: self.samples.len(),
            samples: &self.samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

/// A contiguous window of a recording. Borrows the parent's samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<'a> {
    pub recording_id: &'a str,
    pub start_sample: usize,
    pub end_sample: usize,
    pub samples: &'a [f64],
    pub sample_rate_hz: u32,
}

impl<'a> Segment<'a> {
    /// A segment over an arbitrary sample slice, e.g. for analysing buffers
    /// that never went through a [`Recording`].
    pub fn from_samples(samples: &'a [f64], sample_rate_hz: u32) -> Self {
        Segment {
            recording_id: "",
            start_sample: 0,
            end_sample: samples.len(),
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        (self.end_sample - self.start_sample) as f64 / self.sample_rate_hz as f64
    }

    pub fn rate(&self) -> f64 {
        self.sample_rate_hz as f64
    }
}
