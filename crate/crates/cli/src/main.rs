//! domwatch: ingest labeled domain feeds, extract registration and naming
//! features, train and evaluate classifiers, and report abuse patterns.
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use domwatch_core::eval::{RatioSpec, ResampleMethod};
use domwatch_core::features::FeatureMask;
use domwatch_core::ml::ModelKind;

#[derive(Debug, Parser)]
#[command(
    name = "domwatch",
    version,
    about = "Detect and characterize theme-based malicious domains"
)]
pub struct Cli {
    /// Master seed; every stage derives its randomness from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for parallel training (default: all cores).
    #[arg(long, global = true, env = "DOMWATCH_JOBS")]
    pub jobs: Option<usize>,

    /// Anchor date (YYYY-MM-DD) for lifetime features; defaults to the
    /// dataset's stored date, or today during ingest.
    #[arg(long, global = true, env = "DOMWATCH_REFERENCE_DATE")]
    pub reference_date: Option<NaiveDate>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load feeds, attach WHOIS data, dedup and partition a dataset.
    Ingest(IngestArgs),
    /// Compute the feature table of a dataset.
    Featurize(FeaturizeArgs),
    /// Train one classifier and save it.
    Train(TrainArgs),
    /// Run the feature-set experiments, or a resampling sweep.
    Experiment(ExperimentArgs),
    /// Rank abused registrars and TLDs and chart daily trends.
    Characterize(CharacterizeArgs),
    /// Segment malicious names into dictionary words and count keywords.
    Segment(SegmentArgs),
    /// Query WHOIS for a domain list and write an enrichment file.
    Whois(WhoisArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Malicious feed CSV (repeatable); the file stem names the source.
    #[arg(long = "malicious", required = true)]
    pub malicious: Vec<PathBuf>,

    /// Benign feed CSV (repeatable).
    #[arg(long = "benign", required = true)]
    pub benign: Vec<PathBuf>,

    /// WHOIS enrichment file (JSON lines) joined on domain.
    #[arg(long)]
    pub whois: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Dataset file written by `ingest`.
    #[arg(long)]
    pub dataset: PathBuf,

    /// Output feature CSV.
    #[arg(long)]
    pub out: PathBuf,

    /// Fail on negative lifetimes instead of clamping them to zero.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature CSV from `featurize`.
    #[arg(long)]
    pub features: PathBuf,

    /// dt | rf | knn | lr | svm | ensemble (long names also accepted).
    #[arg(long, value_parser = parse_model_kind)]
    pub model: ModelKind,

    /// exp1 | exp2 | exp3 | all, or comma-separated feature names.
    #[arg(long, value_parser = parse_mask, default_value = "exp3")]
    pub mask: FeatureMask,

    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Feature CSV from `featurize`.
    #[arg(long)]
    pub features: PathBuf,

    /// Output report CSV.
    #[arg(long)]
    pub out: PathBuf,

    /// Training-side resampling method for the experiments.
    #[arg(long, value_parser = parse_method, default_value = "oversample")]
    pub method: ResampleMethod,

    /// Target malicious:benign training ratio.
    #[arg(long, value_parser = parse_ratio, default_value = "1.67:1")]
    pub ratio: RatioSpec,

    /// Test-side fraction of the split.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,

    /// Cross-validation folds; 1 = single split.
    #[arg(long, default_value_t = 1)]
    pub folds: usize,

    /// Run a resampling sweep for one classifier instead of the experiments.
    #[arg(long)]
    pub sweep: bool,

    /// Sweep: ratios to try.
    #[arg(long, value_delimiter = ',', value_parser = parse_ratio, default_value = "1:1,1.67:1,2:1,3:1")]
    pub ratios: Vec<RatioSpec>,

    /// Sweep: methods to try.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "oversample,undersample")]
    pub methods: Vec<ResampleMethod>,

    /// Sweep: classifier kind.
    #[arg(long, value_parser = parse_model_kind, default_value = "rf")]
    pub classifier: ModelKind,

    /// Sweep: feature mask.
    #[arg(long, value_parser = parse_mask, default_value = "exp3")]
    pub mask: FeatureMask,

    /// Write 0 in the time_s column so identical runs write identical bytes.
    #[arg(long)]
    pub omit_timing: bool,
}

#[derive(Debug, Args)]
pub struct CharacterizeArgs {
    /// Dataset file written by `ingest`.
    #[arg(long)]
    pub dataset: PathBuf,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,

    /// Entries per rank table.
    #[arg(long, default_value_t = 10)]
    pub top: usize,

    /// Also render the rank tables as text bars on standard error.
    #[arg(long)]
    pub bars: bool,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Dataset file written by `ingest`.
    #[arg(long)]
    pub dataset: PathBuf,

    /// Output keyword CSV.
    #[arg(long)]
    pub out: PathBuf,

    /// Word list file, one lowercase word per line; defaults to the bundled list.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,

    /// Drop keywords seen fewer times than this.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
}

#[derive(Debug, Args)]
pub struct WhoisArgs {
    /// CSV with a `domain` column.
    #[arg(long)]
    pub domains: PathBuf,

    /// Output enrichment file (JSON lines).
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value = "whois.verisign-grs.com")]
    pub server: String,

    #[arg(long, default_value_t = 10_000)]
    pub timeout_ms: u64,

    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,

    /// Minimum spacing between queries to the same server.
    #[arg(long, default_value_t = 100)]
    pub politeness_ms: u64,

    /// Serve responses from `<dir>/<domain>.txt` instead of the network.
    #[arg(long)]
    pub fixture_dir: Option<PathBuf>,
}

fn parse_model_kind(s: &str) -> Result<ModelKind, String> {
    match s {
        "dt" | "decision_tree" => Ok(ModelKind::DecisionTree),
        "rf" | "random_forest" => Ok(ModelKind::RandomForest),
        "knn" => Ok(ModelKind::Knn),
        "lr" | "logistic_regression" => Ok(ModelKind::LogisticRegression),
        "svm" | "linear_svm" => Ok(ModelKind::LinearSvm),
        "ensemble" => Ok(ModelKind::Ensemble),
        other => Err(format!(
            "unknown model {other:?} (expected dt, rf, knn, lr, svm or ensemble)"
        )),
    }
}

fn parse_mask(s: &str) -> Result<FeatureMask, String> {
    match s {
        "exp1" => Ok(FeatureMask::lexical()),
        "exp2" => Ok(FeatureMask::whois()),
        "exp3" => Ok(FeatureMask::combined()),
        "all" => Ok(FeatureMask::all()),
        list => {
            let names: Vec<&str> = list.split(',').collect();
            FeatureMask::from_names(&names).map_err(|e| e.to_string())
        }
    }
}

fn parse_method(s: &str) -> Result<ResampleMethod, String> {
    s.parse()
}

fn parse_ratio(s: &str) -> Result<RatioSpec, String> {
    s.parse().map_err(|e: domwatch_core::eval::RatioParseError| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        // ignore the error when a pool already exists (tests call run twice)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
