//! Estimators that assume no unmeasured confounding given the frame's
//! adjustment columns.
//!
//! Each estimator returns a report with a provisional analytic standard
//! error where one is cheap (model, delta method, sandwich); bootstrap
//! standard errors are attached by the caller (see [`crate::battery`]).

mod matching;

pub use matching::{match_units, matching, MatchConfig, Matches};

use crate::error::EstimError;
use crate::estimands::{AnalysisFrame, Contrast, EstimateReport, SeMethod};
use crate::inference::weighted_sandwich;
use crate::numkit::{ols_fit, predict, DesignMatrix, NumError, RegressionFit};
use crate::propensity::{check_arms, Strata, WeightKind, WeightSet};
use crate::stats::{mean, sum, variance};

/// Multiple of the mean weight above which a weighting report warns.
pub const EXTREME_WEIGHT_MULTIPLE: f64 = 10.0;

pub const EXPOSURE_LABEL: &str = "a";

/// Difference in means, as the exposure coefficient of `y ~ 1 + a`.
pub fn crude(frame: &AnalysisFrame) -> Result<EstimateReport, EstimError> {
    check_arms(&frame.a)?;
    let x = DesignMatrix::with_intercept(vec![EXPOSURE_LABEL.into()], &[&frame.a])?;
    let fit = ols_fit(&x, &frame.y)?;
    Ok(EstimateReport::new(
        frame.spec,
        "crude regression",
        fit.coefficients[1],
        fit.std_error(1),
        SeMethod::Model,
    ))
}

/// Linear outcome model `y ~ 1 + a + L (+ a:L)`.
#[derive(Debug, Clone)]
pub struct OutcomeModelFit {
    pub fit: RegressionFit,
    pub with_interactions: bool,
}

impl OutcomeModelFit {
    /// Predicted outcome of every frame row with the exposure set to `a`.
    pub fn predict(&self, frame: &AnalysisFrame, a: f64) -> Result<Vec<f64>, EstimError> {
        let set = vec![a; frame.len()];
        let x = outcome_design(frame, &set, self.with_interactions)?;
        Ok(predict(&self.fit, &x)?)
    }

    /// Gradient of `b_a + b_aL' l` with respect to the coefficients.
    fn effect_gradient(&self, l: &[f64]) -> Vec<f64> {
        let k = l.len();
        let mut g = vec![0.0; self.fit.coefficients.len()];
        g[1] = 1.0;
        if self.with_interactions {
            g[2 + k..].copy_from_slice(l);
        }
        g
    }

    fn effect_at(&self, l: &[f64]) -> (f64, f64) {
        let g = self.effect_gradient(l);
        let b = &self.fit.coefficients;
        let est = sum(g.iter().zip(b.iter()).map(|(gi, bi)| gi * bi));
        let v = &self.fit.covariance;
        let mut var = 0.0;
        for (i, gi) in g.iter().enumerate() {
            for (j, gj) in g.iter().enumerate() {
                var += gi * v[(i, j)] * gj;
            }
        }
        (est, var.max(0.0).sqrt())
    }
}

fn outcome_design(frame: &AnalysisFrame, a: &[f64], with_interactions: bool) -> Result<DesignMatrix, NumError> {
    let mut labels = vec![EXPOSURE_LABEL.to_string()];
    let mut cols: Vec<Vec<f64>> = vec![a.to_vec()];
    for (l, c) in &frame.confounders {
        labels.push(l.clone());
        cols.push(c.clone());
    }
    if with_interactions {
        for (l, c) in &frame.confounders {
            labels.push(format!("{EXPOSURE_LABEL}:{l}"));
            cols.push(c.iter().zip(a).map(|(x, ai)| x * ai).collect());
        }
    }
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    DesignMatrix::with_intercept(labels, &refs)
}

pub fn fit_outcome_model(frame: &AnalysisFrame, with_interactions: bool) -> Result<OutcomeModelFit, EstimError> {
    let x = outcome_design(frame, &frame.a, with_interactions)?;
    Ok(OutcomeModelFit {
        fit: ols_fit(&x, &frame.y)?,
        with_interactions,
    })
}

fn column_means(frame: &AnalysisFrame, rows: impl Fn(usize) -> bool) -> Vec<f64> {
    frame
        .confounders
        .iter()
        .map(|(_, c)| {
            let v: Vec<f64> = c.iter().enumerate().filter(|(i, _)| rows(*i)).map(|(_, &x)| x).collect();
            mean(&v)
        })
        .collect()
}

/// Standardised outcome-regression ATE, `b_a + b_aL' mean(L)`. The standard
/// error is the model one without interactions and the delta method (sample
/// means held fixed) with them.
pub fn or_ate(frame: &AnalysisFrame, with_interactions: bool) -> Result<EstimateReport, EstimError> {
    check_arms(&frame.a)?;
    let model = fit_outcome_model(frame, with_interactions)?;
    let (est, se) = model.effect_at(&column_means(frame, |_| true));
    let (label, method) = if with_interactions {
        ("regression adjustment (with interactions)", SeMethod::DeltaMethod)
    } else {
        ("regression adjustment (without interactions)", SeMethod::Model)
    };
    Ok(EstimateReport::new(frame.spec, label, est, se, method))
}

/// Outcome-regression ATT from the interaction model: `b_a + b_aL' mean(L | a=1)`.
pub fn or_att(frame: &AnalysisFrame) -> Result<EstimateReport, EstimError> {
    check_arms(&frame.a)?;
    let model = fit_outcome_model(frame, true)?;
    let (est, se) = model.effect_at(&column_means(frame, |i| frame.a[i] == 1.0));
    Ok(EstimateReport::new(
        frame.spec,
        "regression adjustment (with interactions)",
        est,
        se,
        SeMethod::DeltaMethod,
    ))
}

/// Exposure coefficient of `y ~ 1 + a + e(L)`. A score column collinear with
/// the intercept is dropped with a warning, leaving the crude contrast.
pub fn ps_regression(frame: &AnalysisFrame, scores: &[f64]) -> Result<EstimateReport, EstimError> {
    check_arms(&frame.a)?;
    let x = DesignMatrix::with_intercept(vec![EXPOSURE_LABEL.into(), "ps".into()], &[&frame.a, scores])?;
    match ols_fit(&x, &frame.y) {
        Ok(fit) => Ok(EstimateReport::new(
            frame.spec,
            "regression with PS",
            fit.coefficients[1],
            fit.std_error(1),
            SeMethod::Model,
        )),
        Err(NumError::RankDeficient { columns }) if columns == ["ps"] => {
            let mut r = crude(frame)?;
            r.method = "regression with PS".into();
            Ok(r.with_warning("propensity score is constant; column dropped"))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumSummary {
    pub n: usize,
    pub n_treated: usize,
    pub mean_treated: f64,
    pub mean_untreated: f64,
    /// Sampling variance of the difference in means (0 for singleton arms).
    pub variance: f64,
}

pub fn summarize_strata(frame: &AnalysisFrame, strata: &Strata) -> Result<Vec<StratumSummary>, EstimError> {
    if strata.assignment.len() != frame.len() {
        return Err(EstimError::InvalidArgument("strata and frame differ in length".into()));
    }
    strata.check(&frame.a)?;
    let mut arms: Vec<[Vec<f64>; 2]> = vec![[Vec::new(), Vec::new()]; strata.count];
    for ((&s, &a), &y) in strata.assignment.iter().zip(&frame.a).zip(&frame.y) {
        arms[s][usize::from(a == 1.0)].push(y);
    }
    let var_of_mean = |v: &[f64]| if v.len() < 2 { 0.0 } else { variance(v) / v.len() as f64 };
    Ok(arms
        .iter()
        .map(|[c, t]| StratumSummary {
            n: c.len() + t.len(),
            n_treated: t.len(),
            mean_treated: mean(t),
            mean_untreated: mean(c),
            variance: var_of_mean(t) + var_of_mean(c),
        })
        .collect())
}

fn stratified(frame: &AnalysisFrame, strata: &Strata, target: Contrast) -> Result<EstimateReport, EstimError> {
    let summary = summarize_strata(frame, strata)?;
    let (total, treated) = (frame.len() as f64, frame.n_treated() as f64);
    let weight = |s: &StratumSummary| match target {
        Contrast::Att => s.n_treated as f64 / treated,
        _ => s.n as f64 / total,
    };
    let est = sum(summary.iter().map(|s| weight(s) * (s.mean_treated - s.mean_untreated)));
    let var = sum(summary.iter().map(|s| weight(s).powi(2) * s.variance));
    let label = format!("PS stratification ({} strata)", strata.count);
    Ok(EstimateReport::new(frame.spec, &label, est, var.sqrt(), SeMethod::Model).with_diagnostic("strata", strata.count as f64))
}

/// `sum_j (n_j / n)(mean_1j - mean_0j)`.
pub fn stratification_ate(frame: &AnalysisFrame, strata: &Strata) -> Result<EstimateReport, EstimError> {
    stratified(frame, strata, Contrast::Ate)
}

/// `sum_j (n_1j / n_1)(mean_1j - mean_0j)`.
pub fn stratification_att(frame: &AnalysisFrame, strata: &Strata) -> Result<EstimateReport, EstimError> {
    stratified(frame, strata, Contrast::Att)
}

/// Normalised (Hajek) weighting estimator: the exposure coefficient of a
/// weighted regression of `y` on `(1, a)`, with an HC0 sandwich standard error.
pub fn ipw(frame: &AnalysisFrame, weights: &WeightSet, target: Contrast) -> Result<EstimateReport, EstimError> {
    let fits = match target {
        Contrast::Att => weights.kind == WeightKind::AttStabilized,
        Contrast::Ate => weights.kind != WeightKind::AttStabilized,
        _ => false,
    };
    if !fits {
        return Err(EstimError::InvalidArgument(format!(
            "{:?} weights do not target {target:?}",
            weights.kind
        )));
    }
    if weights.weights.len() != frame.len() {
        return Err(EstimError::InvalidArgument("weights and frame differ in length".into()));
    }
    check_arms(&frame.a)?;
    let x = DesignMatrix::with_intercept(vec![EXPOSURE_LABEL.into()], &[&frame.a])?;
    let (fit, cov) = weighted_sandwich(&x, &frame.y, &weights.weights)?;
    let mean_w = mean(&weights.weights);
    let mut report = EstimateReport::new(
        frame.spec,
        "PS IPW",
        fit.coefficients[1],
        cov[(1, 1)].max(0.0).sqrt(),
        SeMethod::Sandwich,
    )
    .with_diagnostic("max_weight", weights.max())
    .with_diagnostic("ess", weights.ess());
    if weights.max() > EXTREME_WEIGHT_MULTIPLE * mean_w {
        report = report.with_warning(format!(
            "extreme weights: max {:.4} exceeds {EXTREME_WEIGHT_MULTIPLE} x mean {:.4}",
            weights.max(),
            mean_w
        ));
    }
    Ok(report)
}

/// Unnormalised (Horvitz-Thompson) weighting means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorvitzThompson {
    pub mean_treated: f64,
    pub mean_untreated: f64,
    pub effect: f64,
}

/// ATE: `n^-1 sum a y / e` and `n^-1 sum (1-a) y / (1-e)`. ATT: the treated
/// mean and `n_0^-1 sum_(a=0) y e/(1-e) P(A=0)/P(A=1)`.
pub fn ipw_ht(frame: &AnalysisFrame, scores: &[f64], target: Contrast) -> Result<HorvitzThompson, EstimError> {
    let (n1, n0) = check_arms(&frame.a)?;
    let n = frame.len() as f64;
    let pinned = scores
        .iter()
        .zip(&frame.a)
        .filter(|(&e, &a)| match target {
            Contrast::Att => a == 0.0 && e >= 1.0,
            _ => (a == 1.0 && e <= 0.0) || (a == 0.0 && e >= 1.0),
        })
        .count();
    if pinned > 0 {
        return Err(EstimError::PositivityViolation { count: pinned });
    }
    let rows = || frame.y.iter().zip(&frame.a).zip(scores);
    let (mean_treated, mean_untreated) = match target {
        Contrast::Att => {
            let ratio = n0 as f64 / n1 as f64;
            let treated = sum(rows().filter(|((_, &a), _)| a == 1.0).map(|((&y, _), _)| y)) / n1 as f64;
            let untreated =
                sum(rows().filter(|((_, &a), _)| a != 1.0).map(|((&y, _), &e)| y * e / (1.0 - e) * ratio)) / n0 as f64;
            (treated, untreated)
        }
        _ => (
            sum(rows().filter(|((_, &a), _)| a == 1.0).map(|((&y, _), &e)| y / e)) / n,
            sum(rows().filter(|((_, &a), _)| a != 1.0).map(|((&y, _), &e)| y / (1.0 - e))) / n,
        ),
    };
    Ok(HorvitzThompson {
        mean_treated,
        mean_untreated,
        effect: mean_treated - mean_untreated,
    })
}

/// Augmented IPW ATE:
/// `mean( a (y - m1)/e + m1 ) - mean( (1-a)(y - m0)/(1-e) + m0 )`.
/// No analytic standard error; the report carries NaN until a bootstrap
/// result is attached.
pub fn aipw(frame: &AnalysisFrame, scores: &[f64], outcome: &OutcomeModelFit) -> Result<EstimateReport, EstimError> {
    check_arms(&frame.a)?;
    let pinned = scores.iter().filter(|&&e| e <= 0.0 || e >= 1.0).count();
    if pinned > 0 {
        return Err(EstimError::PositivityViolation { count: pinned });
    }
    let m1 = outcome.predict(frame, 1.0)?;
    let m0 = outcome.predict(frame, 0.0)?;
    let n = frame.len() as f64;
    let mu1 = sum((0..frame.len()).map(|i| frame.a[i] * (frame.y[i] - m1[i]) / scores[i] + m1[i])) / n;
    let mu0 = sum((0..frame.len()).map(|i| (1.0 - frame.a[i]) * (frame.y[i] - m0[i]) / (1.0 - scores[i]) + m0[i])) / n;
    Ok(EstimateReport::new(frame.spec, "PS DR IPW", mu1 - mu0, f64::NAN, SeMethod::None))
}
