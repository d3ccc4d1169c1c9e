//! Criterion weights from a reciprocal pairwise-comparison matrix
//! (geometric-mean method) with Saaty's consistency ratio.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Saaty's random consistency indices for n = 1..=8.
const RANDOM_INDEX: [f64; 8] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41];

/// Above this ratio a matrix is flagged as inconsistent.
pub const CONSISTENCY_LIMIT: f64 = 0.1;

const RECIPROCAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub criteria: Vec<String>,
    pub entries: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    /// Matrix with criteria labelled `c0..c{n-1}`.
    pub fn unlabelled(entries: Vec<Vec<f64>>) -> Self {
        let criteria = (0..entries.len()).map(|i| format!("c{i}")).collect();
        PairwiseMatrix { criteria, entries }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhpWeights {
    pub weights: Vec<f64>,
    pub lambda_max: f64,
    pub ci: f64,
    pub cr: f64,
    /// `cr <= 0.1`
    pub consistent: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum AhpError {
    #[error("matrix must be square with 1 to 8 rows, got {0}")]
    Shape(usize),
    #[error("criteria count {0} does not match matrix size {1}")]
    Criteria(usize, usize),
    #[error("entry ({0}, {1}) is not a positive finite number")]
    NonPositive(usize, usize),
    #[error("entries ({0}, {1}) and ({1}, {0}) are not reciprocal")]
    NotReciprocal(usize, usize),
}

#[allow(clippy::needless_range_loop)]
pub fn ahp_weights(matrix: &PairwiseMatrix) -> Result<AhpWeights, AhpError> {
    let a = &matrix.entries;
    let n = a.len();
    if n == 0 || n > RANDOM_INDEX.len() || a.iter().any(|row| row.len() != n) {
        return Err(AhpError::Shape(n));
    }
    if matrix.criteria.len() != n {
        return Err(AhpError::Criteria(matrix.criteria.len(), n));
    }
    for i in 0..n {
        for j in 0..n {
            if !(a[i][j].is_finite() && a[i][j] > 0.0) {
                return Err(AhpError::NonPositive(i, j));
            }
            if (a[i][j] * a[j][i] - 1.0).abs() > RECIPROCAL_TOLERANCE {
                return Err(AhpError::NotReciprocal(i, j));
            }
        }
    }

    let geo: Vec<f64> = a
        .iter()
        .map(|row| (row.iter().map(|x| x.ln()).sum::<f64>() / n as f64).exp())
        .collect();
    let total: f64 = geo.iter().sum();
    let weights: Vec<f64> = geo.iter().map(|g| g / total).collect();

    let lambda_max = a
        .iter()
        .zip(&weights)
        .map(|(row, wi)| row.iter().zip(&weights).map(|(x, wj)| x * wj).sum::<f64>() / wi)
        .sum::<f64>()
        / n as f64;
    let ci = if n > 1 {
        ((lambda_max - n as f64) / (n as f64 - 1.0)).max(0.0)
    } else {
        0.0
    };
    let ri = RANDOM_INDEX[n - 1];
    let cr = if ri > 0.0 { ci / ri } else { 0.0 };
    Ok(AhpWeights {
        weights,
        lambda_max,
        ci,
        cr,
        consistent: cr <= CONSISTENCY_LIMIT,
    })
}
