//! `phonokit` command-line pipeline.

mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{PipelineConfig, SchemeArg, SelectionModeArg};
use error::Result;

#[derive(Parser)]
#[command(name = "phonokit", version, about = "Sustained-phonation voice analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort with a manifest.
    Synth(Flags),
    /// Measure every manifest recording into features.csv.
    Extract(Flags),
    /// Rank features for one comparison into ranking.csv.
    Select(Flags),
    /// Cross-validate a classifier and a randomized baseline.
    Evaluate(Flags),
    /// Leaf census of the cross-validated forests.
    Confound(Flags),
    /// Per-feature and demographic group tests into stats.csv.
    Compare(Flags),
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(clap::Args)]
struct Flags {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory relative recording paths resolve against; defaults to the
    /// manifest's directory.
    #[arg(long)]
    audio_root: Option<PathBuf>,
    /// Feature CSV; defaults to features.csv in the output directory.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Groups to compare, positive side first, e.g. LRRK2_PD:IPD or NMC+LRRK2_PD:IPD.
    #[arg(long)]
    comparison: Option<String>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n_features: Option<usize>,
    #[arg(long, value_enum)]
    selection_mode: Option<SelectionModeArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to one sex (F or M).
    #[arg(long)]
    sex: Option<String>,
}

impl Flags {
    fn resolve(self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($flag:expr, $field:expr) => {
                if let Some(v) = $flag {
                    $field = v;
                }
            };
        }
        set!(self.manifest.map(Some), cfg.manifest);
        set!(self.audio_root.map(Some), cfg.audio_root);
        set!(self.features.map(Some), cfg.features);
        set!(self.comparison.map(Some), cfg.comparison);
        set!(self.sex.map(Some), cfg.sex);
        set!(self.scheme, cfg.cv.scheme);
        set!(self.k, cfg.cv.k);
        set!(self.reps, cfg.cv.repetitions);
        set!(self.n_features, cfg.cv.n_features);
        set!(self.selection_mode, cfg.cv.selection_mode);
        set!(self.seed, cfg.seed);
        set!(self.out, cfg.out);
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    let (f, flags): (fn(&PipelineConfig) -> Result<()>, Flags) = match cli.command {
        Command::Synth(a) => (commands::synth, a),
        Command::Extract(a) => (commands::extract, a),
        Command::Select(a) => (commands::select, a),
        Command::Evaluate(a) => (commands::evaluate, a),
        Command::Confound(a) => (commands::confound, a),
        Command::Compare(a) => (commands::compare, a),
    };
    f(&flags.resolve()?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
