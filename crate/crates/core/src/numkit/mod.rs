//! Dense regression core: ordinary and weighted least squares, and
//! maximum-likelihood logistic regression by iteratively reweighted least
//! squares. Everything here is a pure function of its inputs.

mod design;
mod logistic;
mod ols;

pub use design::{DesignMatrix, INTERCEPT};
pub use logistic::{logistic_fit, logistic_fit_with, LogisticOptions};
pub use ols::{ols_fit, wls_fit};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::stats::expit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("design is rank deficient; collinear column(s): {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("need more rows ({rows}) than columns ({columns})")]
    TooFewRows { rows: usize, columns: usize },
    #[error("response must be 0/1 with both values present")]
    InvalidResponse,
    #[error("complete or quasi-complete separation: {pinned} fitted probabilities within 1e-10 of 0 or 1")]
    Separation { pinned: usize },
    #[error("IRLS did not converge in {iterations} iterations (max |score| = {max_score:.3e})")]
    NonConvergence { iterations: usize, max_score: f64 },
    #[error("weights must be finite, nonnegative and not all zero")]
    InvalidWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    Logit,
}

/// Fitted linear predictor with its model-based covariance.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub coefficients: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub labels: Vec<String>,
    pub link: Link,
    pub converged: bool,
    pub n_iterations: usize,
    /// Residual mean square for least-squares fits; 1 for logistic.
    pub scale: f64,
}

impl RegressionFit {
    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|j| self.coefficients[j])
    }

    pub fn std_error(&self, j: usize) -> f64 {
        self.covariance[(j, j)].max(0.0).sqrt()
    }
}

/// Linear predictor mapped through the fit's inverse link.
pub fn predict(fit: &RegressionFit, x: &DesignMatrix) -> Result<Vec<f64>, NumError> {
    if x.columns() != fit.coefficients.len() {
        return Err(NumError::DimensionMismatch {
            what: "prediction design columns",
            expected: fit.coefficients.len(),
            found: x.columns(),
        });
    }
    let eta = x.values() * &fit.coefficients;
    Ok(match fit.link {
        Link::Identity => eta.iter().copied().collect(),
        Link::Logit => eta.iter().map(|&e| expit(e)).collect(),
    })
}

/// Column norms used to equilibrate a design before factorisation.
pub(crate) fn column_scales(x: &DMatrix<f64>) -> Vec<f64> {
    x.column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect()
}

/// Sequential-pivot rank check on the equilibrated Gram matrix: a column
/// whose Cholesky pivot collapses is (numerically) spanned by the columns
/// before it, and is reported by label.
pub(crate) fn check_rank(gram_scaled: &DMatrix<f64>, labels: &[String]) -> Result<(), NumError> {
    const TOL: f64 = 1e-10;
    let p = gram_scaled.nrows();
    let mut l = DMatrix::<f64>::zeros(p, p);
    let mut bad = Vec::new();
    let mut kept = vec![false; p];
    for j in 0..p {
        let mut d = gram_scaled[(j, j)];
        for k in 0..j {
            if kept[k] {
                d -= l[(j, k)] * l[(j, k)];
            }
        }
        if d <= TOL * gram_scaled[(j, j)].max(f64::MIN_POSITIVE) {
            bad.push(labels[j].clone());
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        kept[j] = true;
        for i in (j + 1)..p {
            let mut s = gram_scaled[(i, j)];
            for k in 0..j {
                if kept[k] {
                    s -= l[(i, k)] * l[(j, k)];
                }
            }
            l[(i, j)] = s / djj;
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(NumError::RankDeficient { columns: bad })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_identity_and_logit() {
        let x = [5.0];
        let d = DesignMatrix::with_intercept(vec!["x".into()], &[&x]).unwrap();
        let fit = RegressionFit {
            coefficients: DVector::from_vec(vec![0.0, 2.0]),
            covariance: DMatrix::zeros(2, 2),
            labels: d.labels().to_vec(),
            link: Link::Identity,
            converged: true,
            n_iterations: 0,
            scale: 1.0,
        };
        assert_eq!(predict(&fit, &d).unwrap(), vec![10.0]);

        let logit = RegressionFit {
            coefficients: DVector::zeros(2),
            link: Link::Logit,
            ..fit.clone()
        };
        let many = [1.0, -3.0, 7.0];
        let d3 = DesignMatrix::with_intercept(vec!["x".into()], &[&many]).unwrap();
        assert!(predict(&logit, &d3).unwrap().iter().all(|&p| p == 0.5));

        let narrow = DesignMatrix::from_columns(vec!["x".into()], &[&x]).unwrap();
        assert!(matches!(predict(&fit, &narrow), Err(NumError::DimensionMismatch { .. })));
    }
}
