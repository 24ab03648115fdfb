//! Random forest: bagged entropy trees with per-node feature subsampling.
//! Every tree owns a seed drawn up front from the master stream, so growing
//! trees in parallel yields the same forest as growing them serially.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ml::tree::{grow_tree, label_counts, majority_label, FeaturePool, TreeConfig, TreeNode};
use crate::model::Label;

#[derive(Debug, Clone, Copy)]
pub enum MaxFeatures {
    /// floor(sqrt(feature count)), at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => n_features,
            MaxFeatures::Count(c) => c.clamp(1, n_features),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

/// Grow the forest on an already-scaled matrix.
pub fn grow_forest(matrix: &[Vec<f64>], labels: &[Label], cfg: &ForestConfig) -> Vec<TreeNode> {
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tree_seeds: Vec<u64> = (0..cfg.n_trees).map(|_| master.next_u64()).collect();
    let n = matrix.len();
    let n_features = matrix[0].len();
    let k = cfg.max_features.resolve(n_features);
    let tree_cfg = TreeConfig {
        min_samples_split: cfg.min_samples_split,
    };
    tree_seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let pool = if k >= n_features {
                FeaturePool::All
            } else {
                FeaturePool::Random(k, &mut rng)
            };
            grow_tree(matrix, labels, rows, tree_cfg, pool)
        })
        .collect()
}

/// Majority vote over the trees; 50/50 goes to malicious.
pub fn forest_predict_row(trees: &[TreeNode], row: &[f64]) -> Label {
    let (mal, ben) = label_counts(trees.iter().map(|t| t.predict_row(row)));
    majority_label(mal, ben)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::tree::grow_tree;

    fn blob_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut matrix = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let malicious = rng.random_bool(0.5);
            let center = if malicious { 2.0 } else { -2.0 };
            matrix.push(vec![
                center + rng.random_range(-0.9..0.9),
                center + rng.random_range(-0.9..0.9),
            ]);
            labels.push(if malicious { Label::Malicious } else { Label::Benign });
        }
        (matrix, labels)
    }

    #[test]
    fn single_tree_forest_without_bootstrap_reduces_to_a_tree() {
        for seed in 0..50 {
            let (matrix, labels) = blob_data(40, seed);
            let cfg = ForestConfig {
                n_trees: 1,
                bootstrap: false,
                max_features: MaxFeatures::All,
                seed,
                ..ForestConfig::default()
            };
            let forest = grow_forest(&matrix, &labels, &cfg);
            let tree = grow_tree(
                &matrix,
                &labels,
                (0..matrix.len()).collect(),
                TreeConfig::default(),
                FeaturePool::All,
            );
            for row in &matrix {
                assert_eq!(forest_predict_row(&forest, row), tree.predict_row(row));
            }
        }
    }

    #[test]
    fn same_seed_grows_identical_forests() {
        let (matrix, labels) = blob_data(80, 3);
        let cfg = ForestConfig {
            n_trees: 12,
            seed: 99,
            ..ForestConfig::default()
        };
        let a = grow_forest(&matrix, &labels, &cfg);
        let b = grow_forest(&matrix, &labels, &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn forest_is_thread_count_invariant() {
        let (matrix, labels) = blob_data(60, 4);
        let cfg = ForestConfig {
            n_trees: 8,
            seed: 42,
            ..ForestConfig::default()
        };
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| grow_forest(&matrix, &labels, &cfg));
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| grow_forest(&matrix, &labels, &cfg));
        assert_eq!(serial, parallel);
    }

    #[test]
    fn separable_blobs_train_accurately() {
        let (matrix, labels) = blob_data(200, 7);
        let cfg = ForestConfig {
            seed: 1,
            ..ForestConfig::default()
        };
        let forest = grow_forest(&matrix, &labels, &cfg);
        let correct = matrix
            .iter()
            .zip(&labels)
            .filter(|(row, label)| forest_predict_row(&forest, row) == **label)
            .count();
        assert!(correct as f64 / matrix.len() as f64 >= 0.99);
    }
}
