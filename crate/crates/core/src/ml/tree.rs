//! Binary CART decision trees with entropy impurity. Thresholds sit at
//! midpoints between consecutive distinct values; candidates are scanned in
//! (feature, threshold) order and the first maximal gain wins, so growth is
//! fully deterministic. Nodes split while impure and splittable, matching
//! common library behavior on zero-gain configurations such as XOR data.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::entropy_from_counts;
use crate::model::Label;

/// A grown tree. Split nodes record their gain and sample count for feature
/// importance; `left` holds rows with value <= threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: Label,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        samples: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict_row(&self, row: &[f64]) -> Label {
        match self {
            TreeNode::Leaf { label } => *label,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if row[*feature] <= *threshold {
                    left.predict_row(row)
                } else {
                    right.predict_row(row)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeConfig {
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            min_samples_split: 2,
        }
    }
}

/// Which features each node may split on.
pub enum FeaturePool<'a> {
    All,
    /// Sample this many distinct feature indices per node.
    Random(usize, &'a mut ChaCha8Rng),
}

pub fn label_counts(labels: impl IntoIterator<Item = Label>) -> (usize, usize) {
    let mut malicious = 0;
    let mut benign = 0;
    for label in labels {
        match label {
            Label::Malicious => malicious += 1,
            Label::Benign => benign += 1,
        }
    }
    (malicious, benign)
}

/// Majority label; exact ties go to malicious.
pub fn majority_label(malicious: usize, benign: usize) -> Label {
    if malicious >= benign {
        Label::Malicious
    } else {
        Label::Benign
    }
}

fn node_entropy(malicious: usize, benign: usize) -> f64 {
    entropy_from_counts([malicious, benign], malicious + benign)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

// Best threshold for one feature via a sorted sweep with incremental label
// counts. Returns the first threshold achieving the maximum gain.
fn best_threshold(
    values: &mut Vec<(f64, Label)>,
    parent_entropy: f64,
) -> Option<(f64, f64)> {
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = values.len();
    let (total_mal, total_ben) = label_counts(values.iter().map(|(_, l)| *l));
    let mut left_mal = 0usize;
    let mut left_ben = 0usize;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n - 1 {
        match values[i].1 {
            Label::Malicious => left_mal += 1,
            Label::Benign => left_ben += 1,
        }
        if values[i].0 == values[i + 1].0 {
            continue;
        }
        let threshold = (values[i].0 + values[i + 1].0) / 2.0;
        let left_n = i + 1;
        let right_n = n - left_n;
        let weighted = left_n as f64 / n as f64 * node_entropy(left_mal, left_ben)
            + right_n as f64 / n as f64
                * node_entropy(total_mal - left_mal, total_ben - left_ben);
        let gain = parent_entropy - weighted;
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((threshold, gain));
        }
    }
    best
}

/// Exhaustive best split over the given features, scanned in ascending
/// (feature, threshold) order; the first maximal gain wins. `None` when no
/// feature has two distinct values.
pub fn best_split(
    matrix: &[Vec<f64>],
    labels: &[Label],
    rows: &[usize],
    features: &[usize],
) -> Option<SplitChoice> {
    let (mal, ben) = label_counts(rows.iter().map(|r| labels[*r]));
    let parent_entropy = node_entropy(mal, ben);
    let mut best: Option<SplitChoice> = None;
    let mut values = Vec::with_capacity(rows.len());
    for &feature in features {
        values.clear();
        values.extend(rows.iter().map(|&r| (matrix[r][feature], labels[r])));
        if let Some((threshold, gain)) = best_threshold(&mut values, parent_entropy) {
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

fn grow(
    matrix: &[Vec<f64>],
    labels: &[Label],
    rows: Vec<usize>,
    cfg: TreeConfig,
    pool: &mut FeaturePool,
) -> TreeNode {
    let (mal, ben) = label_counts(rows.iter().map(|r| labels[*r]));
    let leaf = TreeNode::Leaf {
        label: majority_label(mal, ben),
    };
    if mal == 0 || ben == 0 || rows.len() < cfg.min_samples_split {
        return leaf;
    }
    let n_features = matrix[0].len();
    let candidates: Vec<usize> = match pool {
        FeaturePool::All => (0..n_features).collect(),
        FeaturePool::Random(k, rng) => {
            let mut picked = sample(*rng, n_features, (*k).min(n_features)).into_vec();
            picked.sort_unstable();
            picked
        }
    };
    let Some(choice) = best_split(matrix, labels, &rows, &candidates) else {
        return leaf;
    };
    let samples = rows.len();
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&r| matrix[r][choice.feature] <= choice.threshold);
    TreeNode::Split {
        feature: choice.feature,
        threshold: choice.threshold,
        gain: choice.gain,
        samples,
        left: Box::new(grow(matrix, labels, left_rows, cfg, pool)),
        right: Box::new(grow(matrix, labels, right_rows, cfg, pool)),
    }
}

/// Grow a tree on the given rows of an already-scaled matrix.
pub fn grow_tree(
    matrix: &[Vec<f64>],
    labels: &[Label],
    rows: Vec<usize>,
    cfg: TreeConfig,
    mut pool: FeaturePool,
) -> TreeNode {
    grow(matrix, labels, rows, cfg, &mut pool)
}
