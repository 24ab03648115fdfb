//! Classifier training and prediction. Five from-scratch model kinds plus a
//! hard-voting ensemble; every trained model records the feature mask it
//! consumes and the scaler fitted on its training data, and serializes to a
//! stable JSON document.

pub mod forest;
pub mod knn;
pub mod linear;
pub mod scaler;
pub mod tree;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMask;
use crate::model::Label;
use forest::{forest_predict_row, grow_forest, ForestConfig};
use knn::{knn_predict_row, KnnConfig};
use linear::{fit_logistic, fit_svm, label_to_01, label_to_pm1, LogisticConfig, SvmConfig};
use scaler::Scaler;
use tree::{grow_tree, label_counts, majority_label, FeaturePool, TreeConfig, TreeNode};

#[derive(Debug, Error)]
pub enum MlError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("matrix has {rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("expected {expected} feature columns, got {got}")]
    MaskMismatch { expected: usize, got: usize },
    #[error("k = {k} exceeds training size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("loss became non-finite; lower the learning rate")]
    NonFiniteLoss,
    #[error("bad ensemble membership: {0}")]
    WrongMembers(String),
    #[error("feature importance requires a random forest model")]
    NotAForest,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DecisionTree,
    RandomForest,
    Knn,
    LogisticRegression,
    LinearSvm,
    Ensemble,
}

impl ModelKind {
    /// The five kinds a voting ensemble is built from.
    pub const MEMBERS: [ModelKind; 5] = [
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::Knn,
        ModelKind::LogisticRegression,
        ModelKind::LinearSvm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Knn => "knn",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::Ensemble => "ensemble",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Learned parameters per model kind. KNN stores its scaled training data;
/// the forest keeps the seed it was grown from so a saved model can be
/// regrown and compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    DecisionTree {
        tree: TreeNode,
    },
    RandomForest {
        seed: u64,
        trees: Vec<TreeNode>,
    },
    Knn {
        k: usize,
        p: f64,
        matrix: Vec<Vec<f64>>,
        labels: Vec<Label>,
    },
    LogisticRegression {
        weights: Vec<f64>,
        bias: f64,
    },
    LinearSvm {
        weights: Vec<f64>,
        bias: f64,
    },
    Ensemble {
        members: Vec<TrainedModel>,
    },
}

/// A trained classifier: kind, consumed feature mask, fitted scaler and
/// learned parameters. Prediction takes unscaled masked rows and applies the
/// stored scaler internally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub mask: FeatureMask,
    pub scaler: Scaler,
    pub params: ModelParams,
}

fn validate_training(
    matrix: &[Vec<f64>],
    labels: &[Label],
    mask: &FeatureMask,
) -> Result<(), MlError> {
    if matrix.is_empty() {
        return Err(MlError::EmptyTrainingSet);
    }
    if matrix.len() != labels.len() {
        return Err(MlError::LengthMismatch {
            rows: matrix.len(),
            labels: labels.len(),
        });
    }
    let expected = mask.count();
    for row in matrix {
        if row.len() != expected {
            return Err(MlError::MaskMismatch {
                expected,
                got: row.len(),
            });
        }
    }
    Ok(())
}

pub fn train_decision_tree(
    matrix: &[Vec<f64>],
    labels: &[Label],
    mask: FeatureMask,
    cfg: TreeConfig,
) -> Result<TrainedModel, MlError> {
    validate_training(matrix, labels, &mask)?;
    let scaler = Scaler::fit(matrix);
    let scaled = scaler.transform(matrix);
    let tree = grow_tree(
        &scaled,
        labels,
        (0..scaled.len()).collect(),
        cfg,
        FeaturePool::All,
    );
    Ok(TrainedModel {
        kind: ModelKind::DecisionTree,
        mask,
        scaler,
        params: ModelParams::DecisionTree { tree },
    })
}

pub fn train_random_forest(
    matrix: &[Vec<f64>],
    labels: &[Label],
    mask: FeatureMask,
    cfg: ForestConfig,
) -> Result<TrainedModel, MlError> {
    validate_training(matrix, labels, &mask)?;
    let scaler = Scaler::fit(matrix);
    let scaled = scaler.transform(matrix);
    let trees = grow_forest(&scaled, labels, &cfg);
    Ok(TrainedModel {
        kind: ModelKind::RandomForest,
        mask,
        scaler,
        params: ModelParams::RandomForest {
            seed: cfg.seed,
            trees,
        },
    })
}

pub fn train_knn(
    matrix: &[Vec<f64>],
    labels: &[Label],
    mask: FeatureMask,
    cfg: KnnConfig,
) -> Result<TrainedModel, MlError> {
    validate_training(matrix, labels, &mask)?;
    if cfg.k > matrix.len() {
        return Err(MlError::KTooLarge {
            k: cfg.k,
            n: matrix.len(),
        });
    }
    let scaler = Scaler::fit(matrix);
    let scaled = scaler.transform(matrix);
    Ok(TrainedModel {
        kind: ModelKind::Knn,
        mask,
        scaler,
        params: ModelParams::Knn {
            k: cfg.k,
            p: cfg.p,
            matrix: scaled,
            labels: labels.to_vec(),
        },
    })
}

pub fn train_logistic_regression(
    matrix: &[Vec<f64>],
    labels: &[Label],
    mask: FeatureMask,
    cfg: LogisticConfig,
) -> Result<TrainedModel, MlError> {
    validate_training(matrix, labels, &mask)?;
    let scaler = Scaler::fit(matrix);
    let scaled = scaler.transform(matrix);
    let y01: Vec<f64> = labels.iter().map(|l| label_to_01(*l)).collect();
    let (weights, bias, _) =
        fit_logistic(&scaled, &y01, cfg).map_err(|_| MlError::NonFiniteLoss)?;
    Ok(TrainedModel {
        kind: ModelKind::LogisticRegression,
        mask,
        scaler,
        params: ModelParams::LogisticRegression { weights, bias },
    })
}

pub fn train_linear_svm(
    matrix: &[Vec<f64>],
    labels: &[Label],
    mask: FeatureMask,
    cfg: SvmConfig,
) -> Result<TrainedModel, MlError> {
    validate_training(matrix, labels, &mask)?;
    let scaler = Scaler::fit(matrix);
    let scaled = scaler.transform(matrix);
    let ypm: Vec<f64> = labels.iter().map(|l| label_to_pm1(*l)).collect();
    let mut rng = rand::SeedableRng::seed_from_u64(cfg.seed);
    let (weights, bias) = fit_svm(&scaled, &ypm, cfg, &mut rng);
    Ok(TrainedModel {
        kind: ModelKind::LinearSvm,
        mask,
        scaler,
        params: ModelParams::LinearSvm { weights, bias },
    })
}

fn linear_predict_row(weights: &[f64], bias: f64, row: &[f64]) -> Label {
    let z: f64 = weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + bias;
    // z = 0 sits exactly on the boundary and resolves to malicious
    if z >= 0.0 {
        Label::Malicious
    } else {
        Label::Benign
    }
}

/// Predict labels for unscaled masked rows.
pub fn predict(model: &TrainedModel, matrix: &[Vec<f64>]) -> Result<Vec<Label>, MlError> {
    let expected = model.mask.count();
    for row in matrix {
        if row.len() != expected {
            return Err(MlError::MaskMismatch {
                expected,
                got: row.len(),
            });
        }
    }
    match &model.params {
        ModelParams::DecisionTree { tree } => Ok(matrix
            .iter()
            .map(|row| tree.predict_row(&model.scaler.transform_row(row)))
            .collect()),
        ModelParams::RandomForest { trees, .. } => Ok(matrix
            .iter()
            .map(|row| forest_predict_row(trees, &model.scaler.transform_row(row)))
            .collect()),
        ModelParams::Knn {
            k,
            p,
            matrix: train,
            labels,
        } => Ok(matrix
            .iter()
            .map(|row| knn_predict_row(train, labels, *k, *p, &model.scaler.transform_row(row)))
            .collect()),
        ModelParams::LogisticRegression { weights, bias }
        | ModelParams::LinearSvm { weights, bias } => Ok(matrix
            .iter()
            .map(|row| linear_predict_row(weights, *bias, &model.scaler.transform_row(row)))
            .collect()),
        ModelParams::Ensemble { members } => vote_ensemble(members, matrix),
    }
}

fn check_members(members: &[TrainedModel]) -> Result<(), MlError> {
    if members.len() != ModelKind::MEMBERS.len() {
        return Err(MlError::WrongMembers(format!(
            "expected {} members, got {}",
            ModelKind::MEMBERS.len(),
            members.len()
        )));
    }
    for kind in ModelKind::MEMBERS {
        if members.iter().filter(|m| m.kind == kind).count() != 1 {
            return Err(MlError::WrongMembers(format!(
                "need exactly one {kind} member"
            )));
        }
    }
    let mask = &members[0].mask;
    if members.iter().any(|m| &m.mask != mask) {
        return Err(MlError::WrongMembers(
            "members disagree on the feature mask".to_string(),
        ));
    }
    Ok(())
}

/// Unweighted per-row majority over the five member kinds. Five voters make
/// ties impossible.
pub fn vote_ensemble(
    members: &[TrainedModel],
    matrix: &[Vec<f64>],
) -> Result<Vec<Label>, MlError> {
    check_members(members)?;
    let mut votes: Vec<Vec<Label>> = Vec::with_capacity(members.len());
    for member in members {
        votes.push(predict(member, matrix)?);
    }
    Ok((0..matrix.len())
        .map(|row| {
            let (mal, ben) = label_counts(votes.iter().map(|v| v[row]));
            majority_label(mal, ben)
        })
        .collect())
}

/// Wrap five member models into a single hard-voting model.
pub fn make_ensemble(members: Vec<TrainedModel>) -> Result<TrainedModel, MlError> {
    check_members(&members)?;
    Ok(TrainedModel {
        kind: ModelKind::Ensemble,
        mask: members[0].mask.clone(),
        // members scale for themselves; this copy only keeps the field total
        scaler: members[0].scaler.clone(),
        params: ModelParams::Ensemble { members },
    })
}

/// Mean decrease in impurity per masked feature, averaged over the forest's
/// trees and normalized to sum 1 when any split occurred. Scores align with
/// `mask.features()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub mask: FeatureMask,
    pub scores: Vec<f64>,
}

impl FeatureImportance {
    pub fn named(&self) -> Vec<(String, f64)> {
        self.mask
            .names()
            .into_iter()
            .zip(self.scores.iter().copied())
            .collect()
    }
}

fn accumulate_gains(node: &TreeNode, root_samples: f64, scores: &mut [f64]) {
    if let TreeNode::Split {
        feature,
        gain,
        samples,
        left,
        right,
        ..
    } = node
    {
        scores[*feature] += *samples as f64 / root_samples * gain;
        accumulate_gains(left, root_samples, scores);
        accumulate_gains(right, root_samples, scores);
    }
}

pub fn feature_importance(model: &TrainedModel) -> Result<FeatureImportance, MlError> {
    let ModelParams::RandomForest { trees, .. } = &model.params else {
        return Err(MlError::NotAForest);
    };
    let width = model.mask.count();
    let mut scores = vec![0.0; width];
    for tree in trees {
        if let TreeNode::Split { samples, .. } = tree {
            accumulate_gains(tree, *samples as f64, &mut scores);
        }
    }
    for s in &mut scores {
        *s /= trees.len() as f64;
    }
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        for s in &mut scores {
            *s /= total;
        }
    }
    Ok(FeatureImportance {
        mask: model.mask.clone(),
        scores,
    })
}

/// Serialize a model to a JSON document. Loading and re-saving reproduces
/// the file byte for byte.
pub fn save_model(path: &Path, model: &TrainedModel) -> Result<(), MlError> {
    let file = File::create(path).map_err(|e| MlError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, model).map_err(|e| MlError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    w.write_all(b"\n").map_err(|e| MlError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    w.flush().map_err(|e| MlError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, MlError> {
    let file = File::open(path).map_err(|e| MlError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| MlError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mask5() -> FeatureMask {
        FeatureMask::lexical()
    }

    fn mask1() -> FeatureMask {
        FeatureMask::from_names(&["f5"]).unwrap()
    }

    fn mask2() -> FeatureMask {
        FeatureMask::from_names(&["f5", "f7"]).unwrap()
    }

    fn blob_data(n: usize, seed: u64, cols: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut matrix = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let malicious = rng.random_bool(0.5);
            let center = if malicious { 2.0 } else { -2.0 };
            matrix.push((0..cols).map(|_| center + rng.random_range(-0.8..0.8)).collect());
            labels.push(if malicious { Label::Malicious } else { Label::Benign });
        }
        (matrix, labels)
    }

    #[test]
    fn every_kind_trains_and_separates_blobs() {
        let (matrix, labels) = blob_data(60, 1, 2);
        let models = vec![
            train_decision_tree(&matrix, &labels, mask2(), TreeConfig::default()).unwrap(),
            train_random_forest(
                &matrix,
                &labels,
                mask2(),
                ForestConfig { n_trees: 15, seed: 3, ..ForestConfig::default() },
            )
            .unwrap(),
            train_knn(&matrix, &labels, mask2(), KnnConfig::default()).unwrap(),
            train_logistic_regression(&matrix, &labels, mask2(), LogisticConfig::default())
                .unwrap(),
            train_linear_svm(&matrix, &labels, mask2(), SvmConfig::default()).unwrap(),
        ];
        for model in &models {
            let predictions = predict(model, &matrix).unwrap();
            let correct = predictions
                .iter()
                .zip(&labels)
                .filter(|(p, t)| p == t)
                .count();
            assert!(
                correct as f64 / labels.len() as f64 >= 0.95,
                "{} underperformed",
                model.kind
            );
        }
        let ensemble = make_ensemble(models).unwrap();
        let predictions = predict(&ensemble, &matrix).unwrap();
        let correct = predictions.iter().zip(&labels).filter(|(p, t)| p == t).count();
        assert!(correct as f64 / labels.len() as f64 >= 0.95);
    }

    #[test]
    fn predict_rejects_wrong_width() {
        let (matrix, labels) = blob_data(20, 2, 2);
        let model = train_decision_tree(&matrix, &labels, mask2(), TreeConfig::default()).unwrap();
        assert!(matches!(
            predict(&model, &[vec![1.0, 2.0, 3.0]]),
            Err(MlError::MaskMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn knn_rejects_oversized_k() {
        let (matrix, labels) = blob_data(5, 3, 2);
        assert!(matches!(
            train_knn(&matrix, &labels, mask2(), KnnConfig { k: 8, p: 2.0 }),
            Err(MlError::KTooLarge { k: 8, n: 5 })
        ));
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert!(matches!(
            train_decision_tree(&[], &[], mask2(), TreeConfig::default()),
            Err(MlError::EmptyTrainingSet)
        ));
    }

    fn leaf_model(kind: ModelKind, label: Label, scaler: &Scaler) -> TrainedModel {
        let params = match kind {
            ModelKind::DecisionTree => ModelParams::DecisionTree {
                tree: TreeNode::Leaf { label },
            },
            ModelKind::RandomForest => ModelParams::RandomForest {
                seed: 0,
                trees: vec![TreeNode::Leaf { label }],
            },
            ModelKind::Knn => ModelParams::Knn {
                k: 1,
                p: 2.0,
                matrix: vec![vec![0.0]],
                labels: vec![label],
            },
            ModelKind::LogisticRegression => ModelParams::LogisticRegression {
                weights: vec![0.0],
                bias: if label == Label::Malicious { 1.0 } else { -1.0 },
            },
            ModelKind::LinearSvm => ModelParams::LinearSvm {
                weights: vec![0.0],
                bias: if label == Label::Malicious { 1.0 } else { -1.0 },
            },
            ModelKind::Ensemble => unreachable!(),
        };
        TrainedModel {
            kind,
            mask: mask1(),
            scaler: scaler.clone(),
            params,
        }
    }

    #[test]
    fn three_two_vote_goes_to_majority() {
        let scaler = Scaler::fit(&[vec![1.0]]);
        let members = vec![
            leaf_model(ModelKind::DecisionTree, Label::Malicious, &scaler),
            leaf_model(ModelKind::RandomForest, Label::Malicious, &scaler),
            leaf_model(ModelKind::Knn, Label::Malicious, &scaler),
            leaf_model(ModelKind::LogisticRegression, Label::Benign, &scaler),
            leaf_model(ModelKind::LinearSvm, Label::Benign, &scaler),
        ];
        let votes = vote_ensemble(&members, &[vec![1.0]]).unwrap();
        assert_eq!(votes, [Label::Malicious]);
    }

    #[test]
    fn ensemble_membership_is_validated() {
        let scaler = Scaler::fit(&[vec![1.0]]);
        let four: Vec<TrainedModel> = ModelKind::MEMBERS[..4]
            .iter()
            .map(|k| leaf_model(*k, Label::Malicious, &scaler))
            .collect();
        assert!(matches!(
            vote_ensemble(&four, &[vec![1.0]]),
            Err(MlError::WrongMembers(_))
        ));

        let mut duplicated: Vec<TrainedModel> = ModelKind::MEMBERS[..4]
            .iter()
            .map(|k| leaf_model(*k, Label::Malicious, &scaler))
            .collect();
        duplicated.push(leaf_model(ModelKind::DecisionTree, Label::Benign, &scaler));
        assert!(matches!(
            make_ensemble(duplicated),
            Err(MlError::WrongMembers(_))
        ));
    }

    #[test]
    fn model_files_roundtrip_byte_identically() {
        let (matrix, labels) = blob_data(40, 9, 2);
        let model = train_random_forest(
            &matrix,
            &labels,
            mask2(),
            ForestConfig { n_trees: 7, seed: 123, ..ForestConfig::default() },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        save_model(&a, &model).unwrap();
        let loaded = load_model(&a).unwrap();
        assert_eq!(loaded, model);
        save_model(&b, &loaded).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn svm_training_is_seed_deterministic() {
        let (matrix, labels) = blob_data(50, 11, 2);
        let cfg = SvmConfig { seed: 77, ..SvmConfig::default() };
        let a = train_linear_svm(&matrix, &labels, mask2(), cfg).unwrap();
        let b = train_linear_svm(&matrix, &labels, mask2(), cfg).unwrap();
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
    }

    #[test]
    fn importance_concentrates_on_the_informative_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut matrix = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..80 {
            let malicious = rng.random_bool(0.5);
            let signal = if malicious { 1.0 } else { -1.0 };
            matrix.push(vec![signal + rng.random_range(-0.3..0.3), 4.2]);
            labels.push(if malicious { Label::Malicious } else { Label::Benign });
        }
        let model = train_random_forest(
            &matrix,
            &labels,
            mask2(),
            ForestConfig { n_trees: 20, seed: 5, ..ForestConfig::default() },
        )
        .unwrap();
        let importance = feature_importance(&model).unwrap();
        assert!((importance.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(importance.scores.iter().all(|s| *s >= 0.0));
        assert!((importance.scores[0] - 1.0).abs() < 1e-9);
        assert_eq!(importance.named()[0].0, "f5");
    }

    #[test]
    fn importance_requires_a_forest() {
        let (matrix, labels) = blob_data(20, 15, 2);
        let model = train_decision_tree(&matrix, &labels, mask2(), TreeConfig::default()).unwrap();
        assert!(matches!(feature_importance(&model), Err(MlError::NotAForest)));
    }

    #[test]
    fn importance_sums_to_one_on_lexical_mask() {
        let (matrix, labels) = blob_data(60, 17, 5);
        let model = train_random_forest(
            &matrix,
            &labels,
            mask5(),
            ForestConfig { n_trees: 10, seed: 2, ..ForestConfig::default() },
        )
        .unwrap();
        let importance = feature_importance(&model).unwrap();
        assert_eq!(importance.scores.len(), 5);
        assert!((importance.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
