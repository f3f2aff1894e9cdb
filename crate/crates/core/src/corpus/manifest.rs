//! Cohort manifest parsing and the audio join.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{load_wav, CorpusError, Group, Recording, Result, Sex};

const REQUIRED: [&str; 3] = ["recording_path", "subject_id", "group"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestRow {
    pub recording_path: String,
    pub subject_id: String,
    pub group: Group,
    pub sex: Sex,
    pub age: Option<f64>,
    pub updrs3: Option<f64>,
    pub disease_duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

/// A manifest row whose audio could not be loaded.
#[derive(Debug)]
pub struct LoadFailure {
    pub row: usize,
    pub recording_path: String,
    pub error: CorpusError,
}

#[derive(Debug, Default)]
pub struct ManifestLoad {
    pub recordings: Vec<Recording>,
    pub failures: Vec<LoadFailure>,
}

fn optional_number(
    record: &csv::StringRecord,
    idx: Option<usize>,
    row: usize,
    column: &str,
) -> Result<Option<f64>> {
    let Some(i) = idx else { return Ok(None) };
    let raw = record.get(i).unwrap_or("").trim();
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| CorpusError::InvalidField {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

/// Parses a manifest CSV. Row numbers in errors are 1-based data rows.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    for name in REQUIRED {
        if col(name).is_none() {
            return Err(CorpusError::MissingColumn(name.to_string()));
        }
    }
    let (path_i, subject_i, group_i) = (
        col("recording_path").unwrap(),
        col("subject_id").unwrap(),
        col("group").unwrap(),
    );
    let (sex_i, age_i, updrs_i, dur_i) = (
        col("sex"),
        col("age"),
        col("updrs3"),
        col("disease_duration"),
    );

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let row = n + 1;
        let recording_path = record.get(path_i).unwrap_or("").to_string();
        if !seen.insert(recording_path.clone()) {
            return Err(CorpusError::DuplicateRecordingPath {
                row,
                path: recording_path,
            });
        }
        let subject_id = record.get(subject_i).unwrap_or("").to_string();
        if subject_id.is_empty() {
            return Err(CorpusError::InvalidField {
                row,
                column: "subject_id".into(),
                value: subject_id,
            });
        }
        let label = record.get(group_i).unwrap_or("");
        let group = label
            .parse::<Group>()
            .map_err(|_| CorpusError::UnknownGroupLabel {
                row,
                label: label.to_string(),
            })?;
        let sex = match sex_i {
            Some(i) => {
                let raw = record.get(i).unwrap_or("");
                Sex::parse(raw).ok_or_else(|| CorpusError::InvalidField {
                    row,
                    column: "sex".into(),
                    value: raw.to_string(),
                })?
            }
            None => Sex::Unknown,
        };
        rows.push(ManifestRow {
            recording_path,
            subject_id,
            group,
            sex,
            age: optional_number(&record, age_i, row, "age")?,
            updrs3: optional_number(&record, updrs_i, row, "updrs3")?,
            disease_duration: optional_number(&record, dur_i, row, "disease_duration")?,
        });
    }
    Ok(Manifest { rows })
}

impl ManifestRow {
    pub fn resolve(&self, audio_root: &Path) -> PathBuf {
        let p = Path::new(&self.recording_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            audio_root.join(p)
        }
    }

    /// Copies this row's metadata onto a loaded recording. The recording id
    /// becomes the manifest path so ids are stable across audio roots.
    pub fn join(&self, mut rec: Recording) -> Recording {
        rec.id = self.recording_path.clone();
        rec.subject_id = self.subject_id.clone();
        rec.group = Some(self.group);
        rec.sex = self.sex;
        rec.age = self.age;
        rec.updrs3 = self.updrs3;
        rec.disease_duration = self.disease_duration;
        rec
    }
}

/// Reads a manifest and loads every referenced recording. Rows whose audio
/// fails to load are collected in [`ManifestLoad::failures`].
pub fn load_manifest(path: impl AsRef<Path>, audio_root: impl AsRef<Path>) -> Result<ManifestLoad> {
    let manifest = read_manifest(path)?;
    let root = audio_root.as_ref();
    let mut out = ManifestLoad::default();
    for (i, row) in manifest.rows.iter().enumerate() {
        match load_wav(row.resolve(root)) {
            Ok(rec) => out.recordings.push(row.join(rec)),
            Err(error) => out.failures.push(LoadFailure {
                row: i + 1,
                recording_path: row.recording_path.clone(),
                error,
            }),
        }
    }
    Ok(out)
}
