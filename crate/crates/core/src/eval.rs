//! Train/test splitting, class-ratio resampling of the training side, the
//! standard detection metrics, ratio sweeps over resampling settings and the
//! three feature-set experiments.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{masked_matrix, FeatureError, FeatureMask, FeatureRow};
use crate::ml::{
    self, forest::ForestConfig, knn::KnnConfig, linear::LogisticConfig, linear::SvmConfig,
    make_ensemble, predict, tree::TreeConfig, vote_ensemble, MlError, ModelKind, TrainedModel,
};
use crate::model::Label;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("{label} class with {count} records cannot give both sides a record")]
    TooSmall { label: String, count: usize },
    #[error("resampling needs both classes present")]
    MissingClass,
    #[error("{predictions} predictions against {truth} truth labels")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("no rows to evaluate")]
    EmptyInput,
    #[error("ratio {ratio} is unreachable by {method} from {malicious} malicious / {benign} benign")]
    UnreachableRatio {
        ratio: RatioSpec,
        method: ResampleMethod,
        malicious: usize,
        benign: usize,
    },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Rounding rule used for every split and resample count.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.2,
            seed: 0,
            stratified: true,
        }
    }
}

/// Row indices of a train/test partition, each side in original row order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded train/test split over per-row labels. Stratified mode draws
/// round-half-up(count * test_fraction) test rows from each class, so class
/// proportions carry over within one record per class.
pub fn split(labels: &[Label], cfg: &SplitConfig) -> Result<SplitIndices, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(EvalError::BadFraction(cfg.test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let groups: Vec<Vec<usize>> = if cfg.stratified {
        [Label::Malicious, Label::Benign]
            .iter()
            .map(|class| {
                (0..labels.len())
                    .filter(|i| labels[*i] == *class)
                    .collect()
            })
            .filter(|g: &Vec<usize>| !g.is_empty())
            .collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    for mut group in groups {
        let label = labels[group[0]].as_str().to_string();
        group.shuffle(&mut rng);
        let take = round_half_up(group.len() as f64 * cfg.test_fraction);
        if take == 0 || take >= group.len() {
            return Err(EvalError::TooSmall {
                label,
                count: group.len(),
            });
        }
        test.extend_from_slice(&group[..take]);
        train.extend_from_slice(&group[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Stratified k-fold partition; fold i tests on bucket i and trains on the
/// rest. Buckets within a class differ in size by at most one.
pub fn kfold_indices(labels: &[Label], k: usize, seed: u64) -> Result<Vec<SplitIndices>, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if k < 2 {
        return Err(EvalError::BadFraction(1.0 / k.max(1) as f64));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); k];
    for class in [Label::Malicious, Label::Benign] {
        let mut group: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == class).collect();
        if group.is_empty() {
            continue;
        }
        if group.len() < k {
            return Err(EvalError::TooSmall {
                label: class.as_str().to_string(),
                count: group.len(),
            });
        }
        group.shuffle(&mut rng);
        for (slot, idx) in group.into_iter().enumerate() {
            buckets[slot % k].push(idx);
        }
    }
    Ok((0..k)
        .map(|fold| {
            let mut test = buckets[fold].clone();
            let mut train: Vec<usize> = buckets
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != fold)
                .flat_map(|(_, b)| b.iter().copied())
                .collect();
            train.sort_unstable();
            test.sort_unstable();
            SplitIndices { train, test }
        })
        .collect())
}

/// Target malicious:benign class ratio, e.g. 1.67:1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSpec {
    pub malicious: f64,
    pub benign: f64,
}

impl RatioSpec {
    pub fn new(malicious: f64, benign: f64) -> Self {
        RatioSpec { malicious, benign }
    }
}

impl fmt::Display for RatioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.malicious, self.benign)
    }
}

#[derive(Debug, Error)]
#[error("bad ratio {0:?}, expected malicious:benign with both sides positive")]
pub struct RatioParseError(String);

impl FromStr for RatioSpec {
    type Err = RatioParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (m, b) = s.split_once(':').ok_or_else(|| RatioParseError(s.to_string()))?;
        let malicious: f64 = m.trim().parse().map_err(|_| RatioParseError(s.to_string()))?;
        let benign: f64 = b.trim().parse().map_err(|_| RatioParseError(s.to_string()))?;
        if !(malicious > 0.0 && benign > 0.0 && malicious.is_finite() && benign.is_finite()) {
            return Err(RatioParseError(s.to_string()));
        }
        Ok(RatioSpec { malicious, benign })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    None,
    Oversample,
    Undersample,
}

impl ResampleMethod {
    pub fn name(self) -> &'static str {
        match self {
            ResampleMethod::None => "none",
            ResampleMethod::Oversample => "oversample",
            ResampleMethod::Undersample => "undersample",
        }
    }
}

impl fmt::Display for ResampleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ResampleMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ResampleMethod::None),
            "oversample" => Ok(ResampleMethod::Oversample),
            "undersample" => Ok(ResampleMethod::Undersample),
            other => Err(format!("unknown resample method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleConfig {
    pub method: ResampleMethod,
    pub ratio: RatioSpec,
    pub seed: u64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            method: ResampleMethod::None,
            ratio: RatioSpec::new(1.0, 1.0),
            seed: 0,
        }
    }
}

/// Resample training rows toward `cfg.ratio`, returning position indices into
/// `labels` (with repeats under oversampling). Oversampling appends seeded
/// with-replacement replicas of the minority class; undersampling keeps a
/// seeded without-replacement subset of the majority class in original order.
/// Targets use round-half-up; a target on the wrong side of the current
/// counts is an error, never a silent fallback. On equal counts the benign
/// class is treated as the minority.
pub fn resample(labels: &[Label], cfg: &ResampleConfig) -> Result<Vec<usize>, EvalError> {
    if cfg.method == ResampleMethod::None {
        return Ok((0..labels.len()).collect());
    }
    let malicious: Vec<usize> = (0..labels.len())
        .filter(|i| labels[*i] == Label::Malicious)
        .collect();
    let benign: Vec<usize> = (0..labels.len())
        .filter(|i| labels[*i] == Label::Benign)
        .collect();
    if malicious.is_empty() || benign.is_empty() {
        return Err(EvalError::MissingClass);
    }
    let unreachable = || EvalError::UnreachableRatio {
        ratio: cfg.ratio,
        method: cfg.method,
        malicious: malicious.len(),
        benign: benign.len(),
    };
    let (minority, majority, minority_component, majority_component) =
        if malicious.len() < benign.len() {
            (&malicious, &benign, cfg.ratio.malicious, cfg.ratio.benign)
        } else {
            (&benign, &malicious, cfg.ratio.benign, cfg.ratio.malicious)
        };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.method {
        ResampleMethod::None => unreachable!(),
        ResampleMethod::Oversample => {
            let target =
                round_half_up(majority.len() as f64 * minority_component / majority_component);
            if target < minority.len() {
                return Err(unreachable());
            }
            let mut out: Vec<usize> = (0..labels.len()).collect();
            out.extend(
                (0..target - minority.len()).map(|_| minority[rng.random_range(0..minority.len())]),
            );
            Ok(out)
        }
        ResampleMethod::Undersample => {
            let target =
                round_half_up(minority.len() as f64 * majority_component / minority_component);
            if target > majority.len() {
                return Err(unreachable());
            }
            let mut keep = vec![true; labels.len()];
            for idx in majority {
                keep[*idx] = false;
            }
            for pos in rand::seq::index::sample(&mut rng, majority.len(), target) {
                keep[majority[pos]] = true;
            }
            Ok((0..labels.len()).filter(|i| keep[*i]).collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub r#fn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.r#fn
    }
}

/// Rates whose denominator was zero; the rate itself is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DegenerateRates {
    pub fpr: bool,
    pub fnr: bool,
    pub f1: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOutcome {
    pub confusion: Confusion,
    pub acc: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub f1: f64,
    pub degenerate: DegenerateRates,
}

/// Accuracy, false-positive rate FP/(FP+TN), false-negative rate FN/(FN+TP)
/// and F1 = 2TP/(2TP+FP+FN), with malicious as the positive class.
pub fn compute_metrics(predictions: &[Label], truth: &[Label]) -> Result<MetricsOutcome, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut c = Confusion {
        tp: 0,
        tn: 0,
        fp: 0,
        r#fn: 0,
    };
    for (p, t) in predictions.iter().zip(truth) {
        match (p.is_positive(), t.is_positive()) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.r#fn += 1,
        }
    }
    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(MetricsOutcome {
        confusion: c,
        acc: (c.tp + c.tn) as f64 / c.total() as f64,
        fpr: rate(c.fp, c.fp + c.tn),
        fnr: rate(c.r#fn, c.r#fn + c.tp),
        f1: rate(2 * c.tp, 2 * c.tp + c.fp + c.r#fn),
        degenerate: DegenerateRates {
            fpr: c.fp + c.tn == 0,
            fnr: c.r#fn + c.tp == 0,
            f1: 2 * c.tp + c.fp + c.r#fn == 0,
        },
    })
}

/// One evaluated cell: which data went in, which classifier ran, how it did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub experiment: String,
    pub classifier: ModelKind,
    pub features: Vec<String>,
    pub method: ResampleMethod,
    pub ratio: RatioSpec,
    pub seed: u64,
    pub outcome: MetricsOutcome,
    pub time_s: f64,
}

/// Seeds for the two stochastic trainers; the rest are deterministic.
#[derive(Debug, Clone, Copy)]
pub struct TrainSeeds {
    pub forest: u64,
    pub svm: u64,
}

impl TrainSeeds {
    pub fn derive(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TrainSeeds {
            forest: rng.next_u64(),
            svm: rng.next_u64(),
        }
    }
}

/// Train the five voting member kinds in their fixed order.
pub fn train_members(
    matrix: &[Vec<f64>],
    labels: &[Label],
    mask: &FeatureMask,
    seeds: TrainSeeds,
) -> Result<Vec<TrainedModel>, MlError> {
    Ok(vec![
        ml::train_decision_tree(matrix, labels, mask.clone(), TreeConfig::default())?,
        ml::train_random_forest(
            matrix,
            labels,
            mask.clone(),
            ForestConfig {
                seed: seeds.forest,
                ..ForestConfig::default()
            },
        )?,
        ml::train_knn(matrix, labels, mask.clone(), KnnConfig::default())?,
        ml::train_logistic_regression(matrix, labels, mask.clone(), LogisticConfig::default())?,
        ml::train_linear_svm(
            matrix,
            labels,
            mask.clone(),
            SvmConfig {
                seed: seeds.svm,
                ..SvmConfig::default()
            },
        )?,
    ])
}

/// Train a single classifier kind with project-default settings.
pub fn train_classifier(
    kind: ModelKind,
    matrix: &[Vec<f64>],
    labels: &[Label],
    mask: &FeatureMask,
    seeds: TrainSeeds,
) -> Result<TrainedModel, MlError> {
    match kind {
        ModelKind::DecisionTree => {
            ml::train_decision_tree(matrix, labels, mask.clone(), TreeConfig::default())
        }
        ModelKind::RandomForest => ml::train_random_forest(
            matrix,
            labels,
            mask.clone(),
            ForestConfig {
                seed: seeds.forest,
                ..ForestConfig::default()
            },
        ),
        ModelKind::Knn => ml::train_knn(matrix, labels, mask.clone(), KnnConfig::default()),
        ModelKind::LogisticRegression => {
            ml::train_logistic_regression(matrix, labels, mask.clone(), LogisticConfig::default())
        }
        ModelKind::LinearSvm => ml::train_linear_svm(
            matrix,
            labels,
            mask.clone(),
            SvmConfig {
                seed: seeds.svm,
                ..SvmConfig::default()
            },
        ),
        ModelKind::Ensemble => make_ensemble(train_members(matrix, labels, mask, seeds)?),
    }
}

/// The three feature-set experiments: lexical/statistical/TLD only,
/// registration-lifetime only, and both combined.
pub fn experiment_masks() -> [(&'static str, FeatureMask); 3] {
    [
        ("exp1", FeatureMask::lexical()),
        ("exp2", FeatureMask::whois()),
        ("exp3", FeatureMask::combined()),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub test_fraction: f64,
    pub method: ResampleMethod,
    pub ratio: RatioSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            test_fraction: 0.2,
            method: ResampleMethod::Oversample,
            ratio: RatioSpec::new(1.67, 1.0),
        }
    }
}

struct ProtocolData<'a> {
    rows: &'a [FeatureRow],
    labels: &'a [Label],
    train_rows: Vec<usize>,
    train_labels: Vec<Label>,
    test_rows: Vec<usize>,
    test_truth: Vec<Label>,
}

fn prepare_protocol<'a>(
    rows: &'a [FeatureRow],
    labels: &'a [Label],
    split_indices: &SplitIndices,
    cfg: &ExperimentConfig,
    resample_seed: u64,
) -> Result<ProtocolData<'a>, EvalError> {
    let train_labels: Vec<Label> = split_indices.train.iter().map(|i| labels[*i]).collect();
    let positions = resample(
        &train_labels,
        &ResampleConfig {
            method: cfg.method,
            ratio: cfg.ratio,
            seed: resample_seed,
        },
    )?;
    let train_rows: Vec<usize> = positions.iter().map(|p| split_indices.train[*p]).collect();
    let train_labels: Vec<Label> = train_rows.iter().map(|i| labels[*i]).collect();
    let test_truth: Vec<Label> = split_indices.test.iter().map(|i| labels[*i]).collect();
    Ok(ProtocolData {
        rows,
        labels,
        train_rows,
        train_labels,
        test_rows: split_indices.test.clone(),
        test_truth,
    })
}

fn run_protocol(
    data: &ProtocolData<'_>,
    cfg: &ExperimentConfig,
    seeds: TrainSeeds,
    suffix: &str,
) -> Result<Vec<EvalReport>, EvalError> {
    let _ = data.labels;
    let mut reports = Vec::new();
    for (name, mask) in experiment_masks() {
        let (matrix, _) = masked_matrix(data.rows, &mask)?;
        let train_matrix: Vec<Vec<f64>> =
            data.train_rows.iter().map(|i| matrix[*i].clone()).collect();
        let test_matrix: Vec<Vec<f64>> =
            data.test_rows.iter().map(|i| matrix[*i].clone()).collect();
        let experiment = format!("{name}{suffix}");
        let mut members = Vec::with_capacity(ModelKind::MEMBERS.len());
        for kind in ModelKind::MEMBERS {
            let start = Instant::now();
            let model = train_classifier(kind, &train_matrix, &data.train_labels, &mask, seeds)?;
            let predictions = predict(&model, &test_matrix)?;
            let time_s = start.elapsed().as_secs_f64();
            reports.push(EvalReport {
                experiment: experiment.clone(),
                classifier: kind,
                features: mask.names(),
                method: cfg.method,
                ratio: cfg.ratio,
                seed: cfg.seed,
                outcome: compute_metrics(&predictions, &data.test_truth)?,
                time_s,
            });
            members.push(model);
        }
        let start = Instant::now();
        let votes = vote_ensemble(&members, &test_matrix)?;
        let time_s = start.elapsed().as_secs_f64();
        reports.push(EvalReport {
            experiment,
            classifier: ModelKind::Ensemble,
            features: mask.names(),
            method: cfg.method,
            ratio: cfg.ratio,
            seed: cfg.seed,
            outcome: compute_metrics(&votes, &data.test_truth)?,
            time_s,
        });
    }
    Ok(reports)
}

/// Run the three experiments over one stratified split: per experiment the
/// five member classifiers train on the identical resampled training set and
/// a sixth row reports their vote, eighteen rows in all.
pub fn run_experiments(
    rows: &[FeatureRow],
    cfg: &ExperimentConfig,
) -> Result<Vec<EvalReport>, EvalError> {
    let labels: Vec<Label> = rows.iter().map(|r| r.vector.label).collect();
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let split_seed = master.next_u64();
    let resample_seed = master.next_u64();
    let seeds = TrainSeeds {
        forest: master.next_u64(),
        svm: master.next_u64(),
    };
    let split_indices = split(
        &labels,
        &SplitConfig {
            test_fraction: cfg.test_fraction,
            seed: split_seed,
            stratified: true,
        },
    )?;
    let data = prepare_protocol(rows, &labels, &split_indices, cfg, resample_seed)?;
    run_protocol(&data, cfg, seeds, "")
}

/// K-fold variant: the experiment protocol repeats per fold with the fold's
/// bucket as the test side; rows carry a `.foldN` suffix (1-based).
pub fn run_experiments_folds(
    rows: &[FeatureRow],
    cfg: &ExperimentConfig,
    folds: usize,
) -> Result<Vec<EvalReport>, EvalError> {
    let labels: Vec<Label> = rows.iter().map(|r| r.vector.label).collect();
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fold_seed = master.next_u64();
    let mut reports = Vec::new();
    for (i, split_indices) in kfold_indices(&labels, folds, fold_seed)?.iter().enumerate() {
        let resample_seed = master.next_u64();
        let seeds = TrainSeeds {
            forest: master.next_u64(),
            svm: master.next_u64(),
        };
        let data = prepare_protocol(rows, &labels, split_indices, cfg, resample_seed)?;
        reports.extend(run_protocol(&data, cfg, seeds, &format!(".fold{}", i + 1))?);
    }
    Ok(reports)
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub split: SplitConfig,
    pub methods: Vec<ResampleMethod>,
    pub ratios: Vec<RatioSpec>,
    pub classifier: ModelKind,
    pub seed: u64,
}

/// Sweep rows plus the index of the first row attaining the best F1.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<EvalReport>,
    pub best: usize,
}

/// Evaluate one classifier kind across resampling settings on a fixed split.
/// The first row is always the unresampled baseline (its ratio column echoes
/// the natural training counts); each non-none method then contributes one
/// row per ratio.
pub fn ratio_sweep(
    rows: &[FeatureRow],
    mask: &FeatureMask,
    cfg: &SweepConfig,
) -> Result<SweepTable, EvalError> {
    let (matrix, labels) = masked_matrix(rows, mask)?;
    let split_indices = split(&labels, &cfg.split)?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let resample_seed = master.next_u64();
    let seeds = TrainSeeds {
        forest: master.next_u64(),
        svm: master.next_u64(),
    };
    let train_labels: Vec<Label> = split_indices.train.iter().map(|i| labels[*i]).collect();
    let test_truth: Vec<Label> = split_indices.test.iter().map(|i| labels[*i]).collect();
    let test_matrix: Vec<Vec<f64>> = split_indices.test.iter().map(|i| matrix[*i].clone()).collect();
    let natural = RatioSpec::new(
        train_labels.iter().filter(|l| l.is_positive()).count() as f64,
        train_labels.iter().filter(|l| !l.is_positive()).count() as f64,
    );

    let mut cells: Vec<(ResampleMethod, RatioSpec)> = vec![(ResampleMethod::None, natural)];
    for method in &cfg.methods {
        if *method == ResampleMethod::None {
            continue;
        }
        for ratio in &cfg.ratios {
            cells.push((*method, *ratio));
        }
    }

    let mut reports = Vec::with_capacity(cells.len());
    for (method, ratio) in cells {
        let start = Instant::now();
        let positions = resample(
            &train_labels,
            &ResampleConfig {
                method,
                ratio,
                seed: resample_seed,
            },
        )?;
        let train_matrix: Vec<Vec<f64>> = positions
            .iter()
            .map(|p| matrix[split_indices.train[*p]].clone())
            .collect();
        let resampled_labels: Vec<Label> = positions.iter().map(|p| train_labels[*p]).collect();
        let model = train_classifier(cfg.classifier, &train_matrix, &resampled_labels, mask, seeds)?;
        let predictions = predict(&model, &test_matrix)?;
        let time_s = start.elapsed().as_secs_f64();
        reports.push(EvalReport {
            experiment: format!("sweep.{}", method.name()),
            classifier: cfg.classifier,
            features: mask.names(),
            method,
            ratio,
            seed: cfg.seed,
            outcome: compute_metrics(&predictions, &test_truth)?,
            time_s,
        });
    }
    let best = reports
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.outcome
                .f1
                .total_cmp(&b.1.outcome.f1)
                .then(b.0.cmp(&a.0))
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(SweepTable { rows: reports, best })
}

/// Write reports as CSV with the columns
/// `experiment,classifier,acc,fpr,fnr,f1,time_s`. With `include_timing` off
/// the timing column is written as 0 so reruns are byte-identical.
pub fn write_report_csv(
    path: &Path,
    reports: &[EvalReport],
    include_timing: bool,
) -> Result<(), EvalError> {
    let file = File::create(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io_err = |e: csv::Error| EvalError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    w.write_record(["experiment", "classifier", "acc", "fpr", "fnr", "f1", "time_s"])
        .map_err(io_err)?;
    for r in reports {
        let time_s = if include_timing { r.time_s } else { 0.0 };
        w.write_record([
            r.experiment.as_str(),
            r.classifier.name(),
            &format!("{}", r.outcome.acc),
            &format!("{}", r.outcome.fpr),
            &format!("{}", r.outcome.fnr),
            &format!("{}", r.outcome.f1),
            &format!("{time_s}"),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
