//! k-nearest-neighbor classification over the stored (scaled) training
//! matrix. Minkowski distance; neighbor ties break toward the lower training
//! index, vote ties toward malicious.

use crate::ml::tree::{label_counts, majority_label};
use crate::model::Label;

#[derive(Debug, Clone, Copy)]
pub struct KnnConfig {
    pub k: usize,
    pub p: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 8, p: 2.0 }
    }
}

pub fn minkowski(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

pub fn knn_predict_row(
    matrix: &[Vec<f64>],
    labels: &[Label],
    k: usize,
    p: f64,
    row: &[f64],
) -> Label {
    let mut neighbors: Vec<(f64, usize)> = matrix
        .iter()
        .enumerate()
        .map(|(i, train)| (minkowski(train, row, p), i))
        .collect();
    neighbors.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mal, ben) = label_counts(neighbors[..k].iter().map(|(_, i)| labels[*i]));
    majority_label(mal, ben)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_neighbor_wins_at_k1() {
        let matrix = vec![vec![0.0, 0.0], vec![5.0, 5.0]];
        let labels = vec![Label::Benign, Label::Malicious];
        assert_eq!(knn_predict_row(&matrix, &labels, 1, 2.0, &[5.0, 5.0]), Label::Malicious);
        assert_eq!(knn_predict_row(&matrix, &labels, 1, 2.0, &[0.0, 0.0]), Label::Benign);
    }

    #[test]
    fn even_vote_split_goes_malicious() {
        let matrix: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let labels: Vec<Label> = (0..8)
            .map(|i| if i % 2 == 0 { Label::Malicious } else { Label::Benign })
            .collect();
        assert_eq!(knn_predict_row(&matrix, &labels, 8, 2.0, &[3.5]), Label::Malicious);
    }

    #[test]
    fn distance_ties_break_toward_lower_index() {
        // two training points equidistant from the query with opposite labels
        let matrix = vec![vec![-1.0], vec![1.0], vec![10.0]];
        let labels = vec![Label::Benign, Label::Malicious, Label::Malicious];
        assert_eq!(knn_predict_row(&matrix, &labels, 1, 2.0, &[0.0]), Label::Benign);
    }

    // Brute-force oracle with its own distance computation and selection.
    fn oracle_predict(
        matrix: &[Vec<f64>],
        labels: &[Label],
        k: usize,
        row: &[f64],
    ) -> Label {
        let mut scored: Vec<(f64, usize)> = matrix
            .iter()
            .enumerate()
            .map(|(i, train)| {
                let d2: f64 = train.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mal = scored[..k]
            .iter()
            .filter(|(_, i)| labels[*i] == Label::Malicious)
            .count();
        if mal * 2 >= k {
            Label::Malicious
        } else {
            Label::Benign
        }
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let n = rng.random_range(8..=200);
            let matrix: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..11).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let labels: Vec<Label> = (0..n)
                .map(|_| if rng.random_bool(0.5) { Label::Malicious } else { Label::Benign })
                .collect();
            for _ in 0..5 {
                let query: Vec<f64> = (0..11).map(|_| rng.random_range(-3.0..3.0)).collect();
                assert_eq!(
                    knn_predict_row(&matrix, &labels, 8, 2.0, &query),
                    oracle_predict(&matrix, &labels, 8, &query)
                );
            }
        }
    }
}
