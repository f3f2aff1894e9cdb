//! Feature CSV I/O and assembly of labelled matrices from a manifest.

use std::collections::HashMap;
use std::path::Path;

use phonokit::corpus::{read_manifest, Group, Sex};
use phonokit::evaluation::impute_medians;
use phonokit::selection::FeatureMatrix;
use phonokit::FeatureSchema;

use crate::config::Comparison;
use crate::error::{CliError, Result};

/// Rows of a feature CSV: recording ids and their values (NaN for missing).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn write_features_csv(path: &Path, table: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["recording_id".to_string()];
    header.extend(table.names.iter().cloned());
    w.write_record(&header)?;
    for (id, row) in table.ids.iter().zip(&table.rows) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a feature CSV; the header must carry the current schema's names
/// in order.
pub fn read_features_csv(path: &Path) -> Result<FeatureTable> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::Validation(format!("cannot read features {}: {e}", path.display())))?;
    let header = r.headers()?.clone();
    let schema: Vec<String> = FeatureSchema::get().names().into_iter().map(String::from).collect();
    if header.get(0) != Some("recording_id") || header.iter().skip(1).ne(schema.iter().map(String::as_str)) {
        return Err(CliError::Validation(format!(
            "{}: header does not match the {}-feature schema",
            path.display(),
            schema.len()
        )));
    }
    let mut table = FeatureTable {
        names: schema,
        ids: Vec::new(),
        rows: Vec::new(),
    };
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut values = Vec::with_capacity(table.names.len());
        for (j, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Data(format!("features row {}: bad value `{field}` for {}", i + 1, table.names[j]))
            })?;
            values.push(v);
        }
        if values.len() != table.names.len() {
            return Err(CliError::Data(format!("features row {}: {} values", i + 1, values.len())));
        }
        table.ids.push(rec.get(0).unwrap_or("").to_string());
        table.rows.push(values);
    }
    Ok(table)
}

/// Manifest metadata of one matrix row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMeta {
    pub recording_id: String,
    pub subject_id: String,
    pub group: Group,
    pub sex: Sex,
    pub age: Option<f64>,
    pub updrs3: Option<f64>,
    pub disease_duration: Option<f64>,
}

/// Labelled rows of one comparison, with missing values kept as NaN.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub matrix: FeatureMatrix,
    pub meta: Vec<RowMeta>,
}

impl Cohort {
    /// Assembles the rows whose group lies on either side of the comparison,
    /// optionally restricted to one sex.
    pub fn build(table: &FeatureTable, manifest: &Path, cmp: &Comparison, sex: Option<Sex>) -> Result<Cohort> {
        let manifest = read_manifest(manifest)?;
        let by_path: HashMap<&str, _> = manifest.rows.iter().map(|r| (r.recording_path.as_str(), r)).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut subjects = Vec::new();
        let mut meta = Vec::new();
        for (id, values) in table.ids.iter().zip(&table.rows) {
            let row = by_path
                .get(id.as_str())
                .ok_or_else(|| CliError::Data(format!("recording `{id}` is not in the manifest")))?;
            let Some(label) = cmp.label(row.group) else { continue };
            if sex.is_some_and(|s| s != row.sex) {
                continue;
            }
            rows.push(values.clone());
            labels.push(label);
            subjects.push(row.subject_id.clone());
            meta.push(RowMeta {
                recording_id: id.clone(),
                subject_id: row.subject_id.clone(),
                group: row.group,
                sex: row.sex,
                age: row.age,
                updrs3: row.updrs3,
                disease_duration: row.disease_duration,
            });
        }
        for (class, side) in [(1u8, &cmp.positive), (0u8, &cmp.negative)] {
            if !labels.contains(&class) {
                let names: Vec<&str> = side.iter().map(|g| g.as_str()).collect();
                return Err(CliError::Validation(format!("group {} has no rows in the feature table", names.join("+"))));
            }
        }
        let matrix = FeatureMatrix::new(rows, labels, subjects, table.names.clone())?;
        Ok(Cohort { matrix, meta })
    }

    /// The matrix with every missing value replaced by its column median.
    pub fn imputed(&self) -> FeatureMatrix {
        let all: Vec<usize> = (0..self.matrix.n_rows()).collect();
        let med = impute_medians(&self.matrix, &all);
        let mut m = self.matrix.clone();
        for row in &mut m.rows {
            for (v, md) in row.iter_mut().zip(&med) {
                if v.is_nan() {
                    *v = *md;
                }
            }
        }
        m
    }

    /// Values of column `j` for rows of the given class, missing ones dropped.
    pub fn class_values(&self, j: usize, class: u8) -> Vec<f64> {
        self.matrix
            .rows
            .iter()
            .zip(&self.matrix.labels)
            .filter(|(r, &l)| l == class && !r[j].is_nan())
            .map(|(r, _)| r[j])
            .collect()
    }

    /// A demographic field for rows of the given class, absent ones dropped.
    pub fn class_meta(&self, class: u8, f: fn(&RowMeta) -> Option<f64>) -> Vec<f64> {
        self.meta
            .iter()
            .zip(&self.matrix.labels)
            .filter(|(_, &l)| l == class)
            .filter_map(|(m, _)| f(m))
            .collect()
    }
}
