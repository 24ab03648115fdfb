//! Per-column standardization fitted on training data. Constant columns map
//! to 0 instead of dividing by a zero standard deviation.

use serde::{Deserialize, Serialize};

/// Column means and population standard deviations. A `Scaler` only exists
/// in fitted form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Scaler {
    pub fn fit(matrix: &[Vec<f64>]) -> Scaler {
        assert!(!matrix.is_empty(), "cannot fit a scaler on an empty matrix");
        let cols = matrix[0].len();
        let n = matrix.len() as f64;
        let mut means = vec![0.0; cols];
        for row in matrix {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = vec![0.0; cols];
        for row in matrix {
            for ((v, x), m) in vars.iter_mut().zip(row).zip(&means) {
                let d = x - m;
                *v += d * d;
            }
        }
        let stds = vars.into_iter().map(|v| (v / n).sqrt()).collect();
        Scaler { means, stds }
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        debug_assert_eq!(row.len(), self.width());
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| if *s == 0.0 { 0.0 } else { (x - m) / s })
            .collect()
    }

    pub fn transform(&self, matrix: &[Vec<f64>]) -> Vec<Vec<f64>> {
        matrix.iter().map(|r| self.transform_row(r)).collect()
    }
}
