use nalgebra::{DMatrix, DVector};

use super::{check_rank, column_scales, DesignMatrix, Link, NumError, RegressionFit};

/// Ordinary least squares via Householder QR.
pub fn ols_fit(x: &DesignMatrix, y: &[f64]) -> Result<RegressionFit, NumError> {
    least_squares(x, y, None)
}

/// Weighted least squares minimising `sum w_i (y_i - x_i b)^2`.
///
/// The reported covariance is the model-based `s^2 (X'WX)^-1` with
/// `s^2 = sum w r^2 / (n - p)`; callers who need a robust or resampling
/// standard error compute it separately.
pub fn wls_fit(x: &DesignMatrix, y: &[f64], w: &[f64]) -> Result<RegressionFit, NumError> {
    if w.len() != x.rows() {
        return Err(NumError::DimensionMismatch {
            what: "weights",
            expected: x.rows(),
            found: w.len(),
        });
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().all(|v| *v == 0.0) {
        return Err(NumError::InvalidWeights);
    }
    least_squares(x, y, Some(w))
}

fn least_squares(x: &DesignMatrix, y: &[f64], w: Option<&[f64]>) -> Result<RegressionFit, NumError> {
    let n = x.rows();
    let p = x.columns();
    if y.len() != n {
        return Err(NumError::DimensionMismatch {
            what: "response",
            expected: n,
            found: y.len(),
        });
    }
    if let Some(row) = y.iter().position(|v| !v.is_finite()) {
        return Err(NumError::NonFinite {
            column: "response".into(),
            row,
        });
    }
    let n_eff = w.map_or(n, |w| w.iter().filter(|v| **v > 0.0).count());
    if n_eff <= p {
        return Err(NumError::TooFewRows { rows: n_eff, columns: p });
    }

    let sw: Option<Vec<f64>> = w.map(|w| w.iter().map(|v| v.sqrt()).collect());
    let mut xw = x.values().clone();
    let mut yw = DVector::from_column_slice(y);
    if let Some(sw) = &sw {
        for (i, s) in sw.iter().enumerate() {
            xw.row_mut(i).scale_mut(*s);
            yw[i] *= s;
        }
    }
    let (coefficients, r_inv, scales) = solve_scaled(&xw, &yw, x.labels())?;

    let fitted = x.values() * &coefficients;
    let rss: f64 = crate::stats::sum((0..n).map(|i| {
        let r = y[i] - fitted[i];
        w.map_or(1.0, |w| w[i]) * r * r
    }));
    let scale = rss / (n_eff - p) as f64;
    let covariance = unscaled_covariance(&r_inv, &scales) * scale;

    Ok(RegressionFit {
        coefficients,
        covariance,
        labels: x.labels().to_vec(),
        link: Link::Identity,
        converged: true,
        n_iterations: 1,
        scale,
    })
}

/// Coefficients, `R^-1` of the scaled problem, and the column scales.
type ScaledSolution = (DVector<f64>, DMatrix<f64>, Vec<f64>);

/// Solves `min |Xb - y|` after equilibrating columns to unit norm.
/// Returns the coefficients, `R^-1` of the scaled problem, and the scales.
pub(crate) fn solve_scaled(
    xw: &DMatrix<f64>,
    yw: &DVector<f64>,
    labels: &[String],
) -> Result<ScaledSolution, NumError> {
    let p = xw.ncols();
    let scales = column_scales(xw);
    let mut xs = xw.clone();
    for (j, s) in scales.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*s);
    }
    let gram = xs.tr_mul(&xs);
    check_rank(&gram, labels)?;

    let qr = xs.qr();
    let r = qr.r();
    let mut qty = yw.clone();
    qr.q_tr_mul(&mut qty);
    let top = qty.rows(0, p).into_owned();
    let bs = r
        .solve_upper_triangular(&top)
        .ok_or_else(|| NumError::RankDeficient { columns: labels.to_vec() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| NumError::RankDeficient { columns: labels.to_vec() })?;
    let b = DVector::from_iterator(p, bs.iter().zip(&scales).map(|(b, s)| b / s));
    Ok((b, r_inv, scales))
}

/// `(X'X)^-1` for the original columns, from `R^-1` of the scaled design.
pub(crate) fn unscaled_covariance(r_inv: &DMatrix<f64>, scales: &[f64]) -> DMatrix<f64> {
    let mut c = r_inv * r_inv.transpose();
    let p = scales.len();
    for i in 0..p {
        for j in 0..p {
            c[(i, j)] /= scales[i] * scales[j];
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: &[(&str, &[f64])]) -> DesignMatrix {
        let labels = cols.iter().map(|(l, _)| l.to_string()).collect();
        let data: Vec<&[f64]> = cols.iter().map(|(_, c)| *c).collect();
        DesignMatrix::with_intercept(labels, &data).unwrap()
    }

    #[test]
    fn simple_regression_matches_closed_form() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.1, 3.9, 6.2, 7.8, 10.1];
        let fit = ols_fit(&design(&[("x", &x)]), &y).unwrap();
        // slope = Sxy / Sxx, intercept = ybar - slope * xbar
        let xbar = 3.0;
        let ybar = y.iter().sum::<f64>() / 5.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
        let sxx = 10.0;
        let slope = sxy / sxx;
        assert!((fit.coefficients[1] - slope).abs() < 1e-12);
        assert!((fit.coefficients[0] - (ybar - slope * xbar)).abs() < 1e-12);
        let rss: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - fit.coefficients[0] - slope * a).powi(2))
            .sum();
        let se_slope = (rss / 3.0 / sxx).sqrt();
        assert!((fit.std_error(1) - se_slope).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_gives_mean_and_its_se() {
        let y = [5.0, 7.0, 9.0, 11.0];
        let d = DesignMatrix::with_intercept_rows(4, vec![], &[]).unwrap();
        let fit = ols_fit(&d, &y).unwrap();
        assert!((fit.coefficients[0] - 8.0).abs() < 1e-12);
        let var = (9.0 + 1.0 + 1.0 + 9.0) / 3.0;
        assert!((fit.std_error(0) - (var / 4.0_f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn collinear_column_is_named() {
        let a = [1.0, 0.0, 1.0, 0.0, 1.0];
        let b = [0.0, 1.0, 0.0, 1.0, 0.0];
        let c = [0.3, 0.1, 0.9, 0.4, 0.2];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let err = ols_fit(&design(&[("a", &a), ("c", &c), ("b", &b)]), &y).unwrap_err();
        assert_eq!(err, NumError::RankDeficient { columns: vec!["b".into()] });
    }

    #[test]
    fn wls_with_integer_weights_equals_replicated_ols() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 2.5, 2.9, 5.2];
        let w = [1.0, 2.0, 3.0, 1.0];
        let wfit = wls_fit(&design(&[("x", &x)]), &y, &w).unwrap();
        let mut xr = Vec::new();
        let mut yr = Vec::new();
        for i in 0..4 {
            for _ in 0..w[i] as usize {
                xr.push(x[i]);
                yr.push(y[i]);
            }
        }
        let ofit = ols_fit(&design(&[("x", &xr)]), &yr).unwrap();
        for j in 0..2 {
            assert!((wfit.coefficients[j] - ofit.coefficients[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn wls_of_outcome_on_treatment_is_difference_of_weighted_means() {
        let a = [0.0, 0.0, 1.0, 1.0, 1.0];
        let y = [3.0, 5.0, 10.0, 12.0, 20.0];
        let w = [1.0, 3.0, 2.0, 1.0, 1.0];
        let fit = wls_fit(&design(&[("a", &a)]), &y, &w).unwrap();
        let m0 = (3.0 + 15.0) / 4.0;
        let m1 = (20.0 + 12.0 + 20.0) / 4.0;
        assert!((fit.coefficients[1] - (m1 - m0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_weights_and_too_few_rows() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 2.5];
        let d = design(&[("x", &x)]);
        assert_eq!(wls_fit(&d, &y, &[1.0, -1.0, 1.0]).unwrap_err(), NumError::InvalidWeights);
        assert!(matches!(
            wls_fit(&d, &y, &[1.0, 0.0, 1.0]),
            Err(NumError::TooFewRows { rows: 2, columns: 2 })
        ));
    }
}
