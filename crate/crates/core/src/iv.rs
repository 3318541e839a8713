//! Instrumental-variable estimators for a binary instrument and exposure.

use crate::error::EstimError;
use crate::estimands::{Contrast, EstimateReport, IvFrame, SeMethod};
use crate::numkit::{ols_fit, DesignMatrix};
use crate::stats::{mean, sum, variance};

/// First-stage difference below which estimation is refused.
pub const WEAK_INSTRUMENT_ERROR: f64 = 0.01;
/// First-stage difference below which a warning is attached.
pub const WEAK_INSTRUMENT_WARNING: f64 = 0.1;

pub const INTERPRETATION: &str =
    "ATE if the effect is homogeneous; complier average causal effect under monotonicity";

struct Arms {
    y: [Vec<f64>; 2],
    a: [Vec<f64>; 2],
}

fn arms(frame: &IvFrame) -> Result<Arms, EstimError> {
    let mut out = Arms {
        y: [vec![], vec![]],
        a: [vec![], vec![]],
    };
    for i in 0..frame.len() {
        let z = frame.z[i];
        if z != 0.0 && z != 1.0 {
            return Err(EstimError::InvalidArgument(format!("instrument value {z} at row {i} is not binary")));
        }
        out.y[z as usize].push(frame.y[i]);
        out.a[z as usize].push(frame.a[i]);
    }
    if out.y[0].len() < 2 || out.y[1].len() < 2 {
        return Err(EstimError::WeakOrNullFirstStage { difference: 0.0 });
    }
    Ok(out)
}

fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my))) / (x.len() as f64 - 1.0)
}

fn first_stage_check(difference: f64) -> Result<Option<String>, EstimError> {
    if !difference.is_finite() || difference.abs() < WEAK_INSTRUMENT_ERROR {
        return Err(EstimError::WeakOrNullFirstStage { difference });
    }
    Ok((difference.abs() < WEAK_INSTRUMENT_WARNING)
        .then(|| format!("weak instrument: first-stage difference {difference:.4}")))
}

/// Ratio estimate and its delta-method standard error.
fn ratio(frame: &IvFrame) -> Result<(f64, f64, f64, Option<String>), EstimError> {
    let s = arms(frame)?;
    let num = mean(&s.y[1]) - mean(&s.y[0]);
    let den = mean(&s.a[1]) - mean(&s.a[0]);
    let warning = first_stage_check(den)?;
    let beta = num / den;
    let per_arm = |k: usize| {
        let n = s.y[k].len() as f64;
        (variance(&s.y[k]) / n, variance(&s.a[k]) / n, covariance(&s.y[k], &s.a[k]) / n)
    };
    let (vy1, va1, c1) = per_arm(1);
    let (vy0, va0, c0) = per_arm(0);
    let var = (vy1 + vy0 + beta * beta * (va1 + va0) - 2.0 * beta * (c1 + c0)) / (den * den);
    Ok((beta, var.max(0.0).sqrt(), den, warning))
}

/// `(mean y | z=1 - mean y | z=0) / (mean a | z=1 - mean a | z=0)` with a
/// delta-method standard error.
pub fn wald(frame: &IvFrame) -> Result<EstimateReport, EstimError> {
    let (beta, se, den, warning) = ratio(frame)?;
    let mut r = EstimateReport::new(frame.spec, "IV (Wald)", beta, se, SeMethod::DeltaMethod)
        .with_diagnostic("first_stage_difference", den)
        .with_warning(format!("interpretation: {INTERPRETATION}"));
    if let Some(w) = warning {
        r = r.with_warning(w);
    }
    Ok(r)
}

/// Two-stage least squares with the frame's covariates in both stages. The
/// standard error uses residuals formed with the observed exposure.
pub fn tsls(frame: &IvFrame) -> Result<EstimateReport, EstimError> {
    let _ = arms(frame)?;
    let mut labels = vec!["z".to_string()];
    let mut cols: Vec<&[f64]> = vec![&frame.z];
    for (l, c) in &frame.covariates {
        labels.push(l.clone());
        cols.push(c);
    }
    let x1 = DesignMatrix::with_intercept(labels.clone(), &cols)?;
    let first = ols_fit(&x1, &frame.a)?;
    let warning = first_stage_check(first.coefficients[1])?;
    let fitted: Vec<f64> = (x1.values() * &first.coefficients).iter().copied().collect();
    labels[0] = "a_hat".into();
    cols[0] = &fitted;
    let x2 = DesignMatrix::with_intercept(labels, &cols)?;
    let second = ols_fit(&x2, &frame.y)?;
    // structural residuals use the observed exposure, not its projection
    let mut structural = x2.values().clone();
    structural.column_mut(1).copy_from_slice(&frame.a);
    let resid: Vec<f64> = (structural * &second.coefficients)
        .iter()
        .zip(&frame.y)
        .map(|(f, y)| y - f)
        .collect();
    let dof = (frame.len() - x2.columns()) as f64;
    let sigma2 = sum(resid.iter().map(|r| r * r)) / dof;
    // second.covariance = s2_naive (X'X)^-1; rescale to the structural sigma
    let se = (second.covariance[(1, 1)] / second.scale * sigma2).max(0.0).sqrt();
    let mut r = EstimateReport::new(frame.spec, "IV (2SLS)", second.coefficients[1], se, SeMethod::Model)
        .with_diagnostic("first_stage_coefficient", first.coefficients[1])
        .with_diagnostic("first_stage_f", (first.coefficients[1] / first.std_error(1)).powi(2));
    if let Some(w) = warning {
        r = r.with_warning(w);
    }
    Ok(r)
}

/// Structural mean model `E[Y - Y(0) | A, Z] = beta A` solved from
/// `sum (z - mean z)(y - beta a) = 0`, labelled as the effect in the treated.
/// The second report is the same number read as an ATE, valid only under the
/// additional assumption of no effect modification by the instrument.
pub fn smm_att(frame: &IvFrame) -> Result<(EstimateReport, EstimateReport), EstimError> {
    let (_, se, den, warning) = ratio(frame)?;
    let zbar = mean(&frame.z);
    let num = sum(frame.z.iter().zip(&frame.y).map(|(z, y)| (z - zbar) * y));
    let d = sum(frame.z.iter().zip(&frame.a).map(|(z, a)| (z - zbar) * a));
    let beta = num / d;
    let mut att_spec = frame.spec;
    att_spec.contrast = Contrast::Att;
    let mut ate_spec = frame.spec;
    ate_spec.contrast = Contrast::Ate;
    let mut att = EstimateReport::new(att_spec, "IV (structural mean model)", beta, se, SeMethod::DeltaMethod)
        .with_diagnostic("first_stage_difference", den);
    if let Some(w) = warning {
        att = att.with_warning(w);
    }
    let ate = EstimateReport {
        spec: ate_spec,
        ..att.clone()
    }
    .with_warning("read as an ATE only if the instrument does not modify the effect");
    Ok((att, ate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateBalance {
    pub covariate: String,
    pub smd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvDiagnostics {
    pub exposure_rate_z1: f64,
    pub exposure_rate_z0: f64,
    pub difference: f64,
    /// Squared t statistic of the instrument in `a ~ 1 + z`.
    pub first_stage_f: f64,
    pub balance: Vec<CovariateBalance>,
    pub max_abs_smd: f64,
    pub disclaimer: &'static str,
}

pub const IV_DISCLAIMER: &str = "only the instrument-exposure association is testable; \
the exclusion restriction and instrument-outcome unconfoundedness are not, and covariate balance across \
instrument arms is supportive evidence only";

/// Instrument strength and balance of the frame's covariates across
/// instrument arms (standardised by the pooled SD of the two arms).
pub fn iv_diagnostics(frame: &IvFrame) -> Result<IvDiagnostics, EstimError> {
    let s = arms(frame)?;
    let (r1, r0) = (mean(&s.a[1]), mean(&s.a[0]));
    let x = DesignMatrix::with_intercept(vec!["z".into()], &[&frame.z])?;
    let f = match ols_fit(&x, &frame.a) {
        Ok(fit) if fit.std_error(1) > 0.0 => (fit.coefficients[1] / fit.std_error(1)).powi(2),
        Ok(_) => f64::INFINITY,
        Err(_) => 0.0,
    };
    let balance: Vec<CovariateBalance> = frame
        .covariates
        .iter()
        .map(|(label, col)| {
            let (c1, c0): (Vec<f64>, Vec<f64>) = {
                let c1 = col.iter().zip(&frame.z).filter(|(_, &z)| z == 1.0).map(|(&v, _)| v).collect();
                let c0 = col.iter().zip(&frame.z).filter(|(_, &z)| z != 1.0).map(|(&v, _)| v).collect();
                (c1, c0)
            };
            let sd = ((variance(&c1) + variance(&c0)) / 2.0).sqrt();
            let smd = if sd > 0.0 { (mean(&c1) - mean(&c0)) / sd } else { 0.0 };
            CovariateBalance {
                covariate: label.clone(),
                smd,
            }
        })
        .collect();
    let max_abs_smd = balance.iter().map(|b| b.smd.abs()).fold(0.0, f64::max);
    Ok(IvDiagnostics {
        exposure_rate_z1: r1,
        exposure_rate_z0: r0,
        difference: r1 - r0,
        first_stage_f: f,
        balance,
        max_abs_smd,
        disclaimer: IV_DISCLAIMER,
    })
}
