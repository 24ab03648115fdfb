//! Detection toolkit for theme-based malicious domains: ingest labeled feeds
//! and WHOIS data, compute lexical and registration-lifetime features, train
//! from-scratch classifiers, and report on abused registrars, TLDs and
//! naming themes.

pub mod characterize;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod ml;
pub mod model;
pub mod synth;
pub mod whois;
pub mod wordseg;

pub use characterize::{
    rank_registrars, rank_tlds, render_bars, trend, write_rank_csv, write_trend_csv,
    CharacterizeError, RankTable, TrendSeries, MERGED_SERIES,
};
pub use eval::{
    compute_metrics, experiment_masks, kfold_indices, ratio_sweep, resample, run_experiments,
    run_experiments_folds, split, write_report_csv, Confusion, EvalError, EvalReport,
    ExperimentConfig, MetricsOutcome, RatioSpec, ResampleConfig, ResampleMethod, SplitConfig,
    SplitIndices, SweepConfig, SweepTable, TrainSeeds,
};
pub use features::{
    build_reputation, featurize, FeatureError, FeatureId, FeatureMask, FeatureRow, FeatureVector,
    Featurized, LifetimeMode, ReputationTable,
};
pub use ingest::{
    attach_whois, load_domains, partition, read_dataset, write_dataset, Dataset, DatasetPartition,
    IngestError, MergeStats,
};
pub use ml::{
    feature_importance, load_model, make_ensemble, predict, save_model, train_decision_tree,
    train_knn, train_linear_svm, train_logistic_regression, train_random_forest, vote_ensemble,
    FeatureImportance, MlError, ModelKind, ModelParams, TrainedModel,
};
pub use model::{
    normalize_domain, normalize_registrar, parse_iso_date, DomainName, Label, ModelError,
    WebsiteRecord, WhoisRecord,
};
pub use synth::{generate, write_ingest_files, SynthConfig, SynthFiles};
pub use whois::{
    fetch_batch, fetch_whois, parse_whois_text, BatchConfig, BatchOutcome, FixtureTransport,
    TcpTransport, WhoisError, WhoisResponse, WhoisTransport,
};
pub use wordseg::{
    extract_keywords, segment, KeywordEntry, Lexicon, Segmentation, WordsegError,
};
