//! Subcommand implementations. Each reads its inputs, runs one pipeline
//! stage and writes its outputs under the configured directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use phonokit::corpus::{read_manifest, Group, Sex};
use phonokit::evaluation::{
    balanced_kfold_cv, cv_confounding_report, ks_test_2sample, loso_cv, mann_whitney_u, random_baseline_cv,
    t_test_unpaired, write_summary_csv, CvReport, EvalError, SelectionMode, TestResult,
};
use phonokit::selection::{rank_all, RankingTable};
use phonokit::synth::{synthesize, write_phonation, SynthParams};
use phonokit::{extract_all, load_manifest, quality_gate, select_segment, FeatureSchema, GateDecision, SCHEMA_VERSION};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Comparison, PipelineConfig, SchemeArg};
use crate::data::{read_features_csv, write_features_csv, Cohort, FeatureTable, RowMeta};
use crate::error::{CliError, Result};

fn out_dir(cfg: &PipelineConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cfg.out.display())))?;
    Ok(&cfg.out)
}

fn manifest_path(cfg: &PipelineConfig) -> Result<&Path> {
    cfg.manifest
        .as_deref()
        .ok_or_else(|| CliError::Validation("--manifest is required".into()))
}

fn features_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.features.clone().unwrap_or_else(|| cfg.out.join("features.csv"))
}

fn sex_filter(cfg: &PipelineConfig) -> Result<Option<Sex>> {
    match cfg.sex.as_deref() {
        None => Ok(None),
        Some(s) => match Sex::parse(s) {
            Some(x @ (Sex::F | Sex::M)) => Ok(Some(x)),
            _ => Err(CliError::Validation(format!("--sex must be F or M, got `{s}`"))),
        },
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes a synthetic cohort: WAV files with ground-truth sidecars and a
/// manifest listing them.
pub fn synth(cfg: &PipelineConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    let cohort = &cfg.synth;
    let per_subject = cohort.recordings_per_subject.max(1);
    let mut jobs = Vec::new();
    for (gi, g) in cohort.groups.iter().enumerate() {
        let group: Group = g
            .label
            .parse()
            .map_err(|e: phonokit::corpus::ParseGroupError| CliError::Validation(e.to_string()))?;
        let n_subjects = g.n_recordings.div_ceil(per_subject).max(1);
        for i in 0..g.n_recordings {
            let (s, r) = (i / per_subject, i % per_subject);
            let f0 = g.f0_min_hz + (g.f0_max_hz - g.f0_min_hz) * (s as f64 + 0.5) / n_subjects as f64;
            let params = SynthParams {
                jitter_pct: g.jitter_pct,
                shimmer_pct: g.shimmer_pct,
                hnr_db: g.hnr_db,
                duration_s: cohort.duration_s,
                sample_rate_hz: cohort.sample_rate_hz,
                seed: cfg
                    .seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add((gi * 100_000 + i) as u64),
                ..SynthParams::new(f0 * (1.0 + 0.02 * r as f64))
            };
            let subject = format!("{}_s{s:02}", group.as_str());
            jobs.push((format!("{subject}_r{r}.wav"), subject, group, g.sex.clone(), s, params));
        }
    }
    let phonations = jobs
        .par_iter()
        .map(|job| synthesize(&job.5))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = csv::Writer::from_path(out.join("manifest.csv"))?;
    w.write_record(["recording_path", "subject_id", "group", "sex", "age", "updrs3", "disease_duration"])?;
    for ((file, subject, group, sex, s, _), ph) in jobs.iter().zip(&phonations) {
        write_phonation(&out.join(file), ph)?;
        let age = (50 + (s * 7) % 25).to_string();
        w.write_record([file.as_str(), subject, group.as_str(), sex, &age, "", ""])?;
    }
    w.flush()?;
    eprintln!("wrote {} recordings and manifest.csv to {}", jobs.len(), out.display());
    Ok(())
}

/// Segments, gates and measures every manifest recording; accepted ones go
/// to `features.csv`, the rest to `discarded.log` with a reason.
pub fn extract(cfg: &PipelineConfig) -> Result<()> {
    let manifest = manifest_path(cfg)?;
    let root = cfg
        .audio_root
        .clone()
        .unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default());
    let load = load_manifest(manifest, &root)?;
    let out = out_dir(cfg)?;
    let mut discarded: Vec<(String, String)> = load
        .failures
        .iter()
        .map(|f| (f.recording_path.clone(), format!("LoadError: {}", f.error)))
        .collect();
    let results: Vec<std::result::Result<Vec<f64>, String>> = load
        .recordings
        .par_iter()
        .map(|rec| {
            let seg = select_segment(rec, &cfg.segment).map_err(|_| "NoUsableSegment".to_string())?;
            if let GateDecision::Reject(reason) = quality_gate(&seg, &cfg.gate) {
                return Err(reason.to_string());
            }
            let fv = extract_all(&seg, &cfg.extraction).map_err(|e| format!("ExtractionFailed: {e}"))?;
            Ok(fv
                .values
                .iter()
                .zip(&fv.missing)
                .map(|(&v, &miss)| if miss { f64::NAN } else { v })
                .collect())
        })
        .collect();
    let mut table = FeatureTable {
        names: FeatureSchema::get().names().into_iter().map(String::from).collect(),
        ids: Vec::new(),
        rows: Vec::new(),
    };
    for (rec, res) in load.recordings.iter().zip(results) {
        match res {
            Ok(values) => {
                table.ids.push(rec.id.clone());
                table.rows.push(values);
            }
            Err(reason) => discarded.push((rec.id.clone(), reason)),
        }
    }
    let mut log = fs::File::create(out.join("discarded.log"))?;
    for (path, reason) in &discarded {
        writeln!(log, "{path}\t{reason}")?;
    }
    eprintln!("accepted {} recordings, discarded {}", table.ids.len(), discarded.len());
    if table.ids.is_empty() {
        return Err(CliError::Data("no recording passed the quality gate".into()));
    }
    write_features_csv(&out.join("features.csv"), &table)
}

fn load_cohort(cfg: &PipelineConfig, sex: Option<Sex>) -> Result<(Comparison, Cohort)> {
    check_manifest_groups(cfg)?;
    let cmp = cfg.comparison()?;
    let table = read_features_csv(&features_path(cfg))?;
    let cohort = Cohort::build(&table, manifest_path(cfg)?, &cmp, sex)?;
    Ok((cmp, cohort))
}

fn ranking_of(cfg: &PipelineConfig, cohort: &Cohort) -> Result<RankingTable> {
    let m = cohort.imputed();
    m.check_rankable(2)?;
    Ok(rank_all(&m, &cfg.selection)?)
}

/// Ranks the features of one comparison with the five-selector vote.
pub fn select(cfg: &PipelineConfig) -> Result<()> {
    let (cmp, cohort) = load_cohort(cfg, sex_filter(cfg)?)?;
    let table = ranking_of(cfg, &cohort)?;
    let out = out_dir(cfg)?;
    table.write_csv(fs::File::create(out.join("ranking.csv"))?)?;
    let schema = FeatureSchema::get();
    println!("{}: top features", cmp.name());
    println!("{:>4}  {:<40} {:<14} votes", "rank", "feature", "category");
    for (r, &j) in table.top(10).iter().enumerate() {
        println!(
            "{:>4}  {:<40} {:<14} {}",
            r + 1,
            table.feature_names[j],
            schema.category_of(j).as_str(),
            table.vote_counts[j]
        );
    }
    let best = table.aggregate_order[0];
    let separated = ks_test_2sample(&cohort.class_values(best, 1), &cohort.class_values(best, 0))
        .map(|t| t.p_value < 0.05)
        .unwrap_or(false);
    if !separated {
        eprintln!("warning: the top-ranked feature does not separate the groups (KS p >= 0.05); the ranking carries no signal");
    }
    Ok(())
}

#[derive(Serialize)]
struct ComparisonEcho<'a> {
    name: String,
    positive: &'a [Group],
    negative: &'a [Group],
}

impl<'a> ComparisonEcho<'a> {
    fn new(cmp: &'a Comparison) -> Self {
        ComparisonEcho {
            name: cmp.name(),
            positive: &cmp.positive,
            negative: &cmp.negative,
        }
    }
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    schema_version: &'static str,
    config: &'a PipelineConfig,
    comparison: ComparisonEcho<'a>,
    sex: Option<&'static str>,
    selection_mode: SelectionMode,
    /// Where fold rankings come from when selection is global.
    ranking_source: &'static str,
    positive_rows: usize,
    negative_rows: usize,
    top_features: Vec<&'a str>,
    result: &'a CvReport,
    baseline: &'a CvReport,
}

/// Runs the configured validation scheme and the randomized baseline.
/// A sex-stratified run reuses the ranking of the unstratified cohort.
pub fn evaluate(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate_cv()?;
    let sex = sex_filter(cfg)?;
    let (cmp, full) = load_cohort(cfg, None)?;
    let global = ranking_of(cfg, &full)?;
    let global_names: Vec<String> = global
        .aggregate_order
        .iter()
        .map(|&j| global.feature_names[j].clone())
        .collect();
    let cohort = match sex {
        Some(s) => load_cohort(cfg, Some(s))?.1,
        None => full,
    };
    let mut cv = cfg.cv_config();
    let ranking_source = if sex.is_some() {
        cv.selection_mode = SelectionMode::Global;
        cv.global_ranking = Some(global_names.clone());
        "unstratified_cohort"
    } else if cv.selection_mode == SelectionMode::Global {
        cv.global_ranking = Some(global_names.clone());
        "whole_cohort"
    } else {
        "training_fold"
    };
    let m = &cohort.matrix;
    let result = match cfg.cv.scheme {
        SchemeArg::Kfold => balanced_kfold_cv(m, &cv, &())?,
        SchemeArg::Loso => loso_cv(m, &cv, &())?,
    };
    let baseline = random_baseline_cv(m, &cv)?;
    let out = out_dir(cfg)?;
    let report = EvaluationReport {
        schema_version: SCHEMA_VERSION,
        config: cfg,
        comparison: ComparisonEcho::new(&cmp),
        sex: sex.map(Sex::as_str),
        selection_mode: cv.selection_mode,
        ranking_source,
        positive_rows: m.class_count(1),
        negative_rows: m.class_count(0),
        top_features: global_names.iter().take(cfg.cv.n_features).map(String::as_str).collect(),
        result: &result,
        baseline: &baseline,
    };
    write_json(&out.join("report.json"), &report)?;
    let label = match sex {
        Some(s) => format!("{} ({})", cmp.name(), s.as_str()),
        None => cmp.name(),
    };
    write_summary_csv(fs::File::create(out.join("summary.csv"))?, &[(label.clone(), &result), (label, &baseline)])?;
    write_scatter(&out.join("scatter.csv"), &cohort, &global)?;
    println!(
        "{}: sensitivity {:.1}% ({:.1}), specificity {:.1}% ({:.1}); randomized {:.1}% / {:.1}%",
        cmp.name(),
        result.mean_sensitivity,
        result.sd_sensitivity,
        result.mean_specificity,
        result.sd_specificity,
        baseline.mean_sensitivity,
        baseline.mean_specificity
    );
    Ok(())
}

/// Per-recording values of the two top aggregate features.
fn write_scatter(path: &Path, cohort: &Cohort, ranking: &RankingTable) -> Result<()> {
    let top = ranking.top(2);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["recording_id", "group", "feature1_name", "feature1_value", "feature2_name", "feature2_value"])?;
    for (meta, row) in cohort.meta.iter().zip(&cohort.matrix.rows) {
        let mut rec = vec![meta.recording_id.clone(), meta.group.as_str().to_string()];
        for &j in top {
            rec.push(ranking.feature_names[j].clone());
            rec.push(format!("{}", row[j]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ConfoundingOutput<'a> {
    schema_version: &'static str,
    config: &'a PipelineConfig,
    comparison: ComparisonEcho<'a>,
    #[serde(flatten)]
    report: phonokit::evaluation::ConfoundingReport,
}

/// Balanced k-fold run with the leaf census attached to every fold.
pub fn confound(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate_cv()?;
    let (cmp, cohort) = load_cohort(cfg, sex_filter(cfg)?)?;
    let report = cv_confounding_report(&cohort.matrix, &cfg.cv_config())?;
    let out = out_dir(cfg)?;
    println!(
        "{}: {:.2} observations and {:.2} subjects per leaf, {:.2} training subjects, fraction {:.3}",
        cmp.name(),
        report.avg_observations_per_leaf,
        report.avg_subjects_per_leaf,
        report.avg_training_subjects,
        report.subject_fraction
    );
    write_json(
        &out.join("confounding.json"),
        &ConfoundingOutput {
            schema_version: SCHEMA_VERSION,
            config: cfg,
            comparison: ComparisonEcho::new(&cmp),
            report,
        },
    )
}

/// Per-feature KS tests plus demographic tests where the manifest has the
/// columns. A test that cannot run is recorded in the `note` column.
pub fn compare(cfg: &PipelineConfig) -> Result<()> {
    let (cmp, cohort) = load_cohort(cfg, sex_filter(cfg)?)?;
    let mut rows: Vec<(String, &'static str, std::result::Result<TestResult, EvalError>, usize, usize)> = Vec::new();
    for (j, name) in cohort.matrix.feature_names.iter().enumerate() {
        let (a, b) = (cohort.class_values(j, 1), cohort.class_values(j, 0));
        rows.push((name.clone(), "ks2", ks_test_2sample(&a, &b), a.len(), b.len()));
    }
    type Field = fn(&RowMeta) -> Option<f64>;
    let demographics: [(&str, &'static str, Field); 3] = [
        ("age", "ttest", |m| m.age),
        ("updrs3", "mwu", |m| m.updrs3),
        ("disease_duration", "mwu", |m| m.disease_duration),
    ];
    for (name, test, field) in demographics {
        if cohort.meta.iter().all(|m| field(m).is_none()) {
            continue;
        }
        let (a, b) = (cohort.class_meta(1, field), cohort.class_meta(0, field));
        let result = if test == "ttest" { t_test_unpaired(&a, &b) } else { mann_whitney_u(&a, &b) };
        rows.push((name.to_string(), test, result, a.len(), b.len()));
    }
    let out = out_dir(cfg)?;
    let mut w = csv::Writer::from_path(out.join("stats.csv"))?;
    w.write_record(["feature", "test", "statistic", "p_value", "n_positive", "n_negative", "note"])?;
    let mut significant = 0;
    for (name, test, result, na, nb) in &rows {
        let (stat, p, note) = match result {
            Ok(t) => {
                if t.p_value < 0.05 {
                    significant += 1;
                }
                (format!("{}", t.statistic), format!("{}", t.p_value), String::new())
            }
            Err(e) => (String::new(), String::new(), e.to_string()),
        };
        w.write_record([name.as_str(), test, &stat, &p, &na.to_string(), &nb.to_string(), &note])?;
    }
    w.flush()?;
    println!("{}: {} of {} tests with p < 0.05", cmp.name(), significant, rows.len());
    Ok(())
}

/// Checks that a manifest parses and names both sides of the comparison.
fn check_manifest_groups(cfg: &PipelineConfig) -> Result<()> {
    let cmp = cfg.comparison()?;
    let manifest = read_manifest(manifest_path(cfg)?)?;
    for side in [&cmp.positive, &cmp.negative] {
        if !manifest.rows.iter().any(|r| side.contains(&r.group)) {
            let names: Vec<&str> = side.iter().map(|g| g.as_str()).collect();
            return Err(CliError::Validation(format!("group {} is absent from the manifest", names.join("+"))));
        }
    }
    Ok(())
}
