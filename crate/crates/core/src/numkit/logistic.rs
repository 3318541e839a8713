use nalgebra::DVector;

use super::ols::{solve_scaled, unscaled_covariance};
use super::{check_rank, column_scales, DesignMatrix, Link, NumError, RegressionFit};
use crate::stats::{expit, sum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Stop when every score component is below this in absolute value.
    pub score_tol: f64,
    /// Or when the relative change in log-likelihood falls below this.
    pub loglik_rel_tol: f64,
    /// Fitted probabilities closer than this to 0 or 1 signal separation.
    pub separation_eps: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            score_tol: 1e-8,
            loglik_rel_tol: 1e-10,
            separation_eps: 1e-10,
        }
    }
}

pub fn logistic_fit(x: &DesignMatrix, y: &[f64]) -> Result<RegressionFit, NumError> {
    logistic_fit_with(x, y, &LogisticOptions::default())
}

/// Maximum-likelihood logistic regression by IRLS with step halving.
pub fn logistic_fit_with(x: &DesignMatrix, y: &[f64], opts: &LogisticOptions) -> Result<RegressionFit, NumError> {
    let n = x.rows();
    let p = x.columns();
    if y.len() != n {
        return Err(NumError::DimensionMismatch {
            what: "response",
            expected: n,
            found: y.len(),
        });
    }
    if y.iter().any(|v| *v != 0.0 && *v != 1.0) || y.iter().all(|v| *v == 0.0) || y.iter().all(|v| *v == 1.0) {
        return Err(NumError::InvalidResponse);
    }
    if n <= p {
        return Err(NumError::TooFewRows { rows: n, columns: p });
    }
    {
        let mut xs = x.values().clone();
        for (j, s) in column_scales(&xs).iter().enumerate() {
            xs.column_mut(j).unscale_mut(*s);
        }
        check_rank(&xs.tr_mul(&xs), x.labels())?;
    }

    let xv = x.values();
    let mut beta = DVector::<f64>::zeros(p);
    let mut eta = xv * &beta;
    let mut ll = loglik(y, &eta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let probs: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
        let mut xw = xv.clone();
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 0..n {
            let w = (probs[i] * (1.0 - probs[i])).max(1e-300);
            let sw = w.sqrt();
            xw.row_mut(i).scale_mut(sw);
            rhs[i] = (y[i] - probs[i]) / sw;
        }
        let (step, _, _) = solve_scaled(&xw, &rhs, x.labels())?;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let cand_eta = xv * &cand;
            let cand_ll = loglik(y, &cand_eta);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs() {
                accepted = Some((cand, cand_eta, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((nb, ne, nll)) = accepted else {
            // No ascent direction left: we are at the optimum to machine precision.
            converged = true;
            break;
        };
        let rel = (nll - ll).abs() / (ll.abs() + 0.1);
        beta = nb;
        eta = ne;
        ll = nll;
        if score_max(xv, y, &eta) < opts.score_tol || rel < opts.loglik_rel_tol {
            converged = true;
            break;
        }
    }

    let probs: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
    let pinned = probs
        .iter()
        .filter(|&&q| q < opts.separation_eps || q > 1.0 - opts.separation_eps)
        .count();
    if pinned > 0 {
        return Err(NumError::Separation { pinned });
    }
    if !converged {
        return Err(NumError::NonConvergence {
            iterations,
            max_score: score_max(xv, y, &eta),
        });
    }

    let mut xw = xv.clone();
    for (i, p) in probs.iter().enumerate() {
        xw.row_mut(i).scale_mut((p * (1.0 - p)).sqrt());
    }
    let (_, r_inv, scales) = solve_scaled(&xw, &DVector::zeros(n), x.labels())?;
    let covariance = unscaled_covariance(&r_inv, &scales);

    Ok(RegressionFit {
        coefficients: beta,
        covariance,
        labels: x.labels().to_vec(),
        link: Link::Logit,
        converged,
        n_iterations: iterations,
        scale: 1.0,
    })
}

fn loglik(y: &[f64], eta: &DVector<f64>) -> f64 {
    // log(1 + e^x) computed without overflow
    let softplus = |x: f64| if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    sum(y.iter().zip(eta.iter()).map(|(&yi, &e)| yi * e - softplus(e)))
}

fn score_max(xv: &nalgebra::DMatrix<f64>, y: &[f64], eta: &DVector<f64>) -> f64 {
    let resid = DVector::from_iterator(y.len(), y.iter().zip(eta.iter()).map(|(&yi, &e)| yi - expit(e)));
    xv.tr_mul(&resid).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_binary_covariate_reproduces_cell_proportions() {
        // P(A=1 | L=0) = 2/4, P(A=1 | L=1) = 3/4
        let l = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let a = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let d = DesignMatrix::with_intercept(vec!["l".into()], &[&l]).unwrap();
        let fit = logistic_fit(&d, &a).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-10);
        assert!((fit.coefficients[1] - 3.0_f64.ln()).abs() < 1e-10);
        let p = super::super::predict(&fit, &d).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-10 && (p[7] - 0.75).abs() < 1e-10);
        // Var(logit p-hat) = 1/(n p (1-p)) per cell; intercept cell L=0 has n=4, p=1/2
        assert!((fit.covariance[(0, 0)] - 1.0).abs() < 1e-8);
        let v1 = 1.0 + 1.0 / (4.0 * 0.75 * 0.25);
        assert!((fit.covariance[(1, 1)] - v1).abs() < 1e-8);
    }

    #[test]
    fn complete_separation_is_reported() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let a = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let d = DesignMatrix::with_intercept(vec!["x".into()], &[&x]).unwrap();
        assert!(matches!(logistic_fit(&d, &a), Err(NumError::Separation { .. })));
    }

    #[test]
    fn invalid_response_and_collinearity() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let d = DesignMatrix::with_intercept(vec!["x".into()], &[&x]).unwrap();
        assert_eq!(logistic_fit(&d, &[0.0, 0.5, 1.0, 1.0]).unwrap_err(), NumError::InvalidResponse);
        assert_eq!(logistic_fit(&d, &[1.0; 4]).unwrap_err(), NumError::InvalidResponse);
        let twice: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let dd = DesignMatrix::with_intercept(vec!["x".into(), "x2".into()], &[&x, &twice]).unwrap();
        assert_eq!(
            logistic_fit(&dd, &[0.0, 1.0, 0.0, 1.0]).unwrap_err(),
            NumError::RankDeficient { columns: vec!["x2".into()] }
        );
    }

    #[test]
    fn iteration_cap_is_enforced() {
        let x = [0.1, 0.5, 0.9, 1.3, 2.0, 2.2];
        let a = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let d = DesignMatrix::with_intercept(vec!["x".into()], &[&x]).unwrap();
        let opts = LogisticOptions {
            max_iter: 1,
            score_tol: 0.0,
            loglik_rel_tol: 0.0,
            ..LogisticOptions::default()
        };
        assert!(matches!(
            logistic_fit_with(&d, &a, &opts),
            Err(NumError::NonConvergence { iterations: 1, .. })
        ));
    }
}
