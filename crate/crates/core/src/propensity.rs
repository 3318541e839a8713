//! Propensity scores: fitting, weights, stratification, and balance and
//! overlap diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::EstimError;
use crate::estimands::AnalysisFrame;
use crate::numkit::{logistic_fit, predict, RegressionFit};
use crate::stats::{quantile_sorted, sorted, sum, variance, weighted_mean, weighted_variance};

#[derive(Debug, Clone)]
pub struct PropensityFit {
    pub model: RegressionFit,
    /// Estimated P(A = 1 | L) per frame row.
    pub scores: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Logistic regression of the frame's exposure on its adjustment columns.
pub fn fit_ps(frame: &AnalysisFrame) -> Result<PropensityFit, EstimError> {
    check_arms(&frame.a)?;
    let x = frame.confounder_design()?;
    let model = logistic_fit(&x, &frame.a)?;
    let scores = predict(&model, &x)?;
    let mut warnings = Vec::new();
    let pinned = scores.iter().filter(|&&e| e <= 0.0 || e >= 1.0).count();
    if pinned > 0 {
        warnings.push(format!("positivity: {pinned} score(s) at 0 or 1"));
    }
    Ok(PropensityFit {
        model,
        scores,
        warnings,
    })
}

pub(crate) fn check_arms(a: &[f64]) -> Result<(usize, usize), EstimError> {
    let n1 = a.iter().filter(|&&v| v == 1.0).count();
    let n0 = a.len() - n1;
    if n1 == 0 {
        return Err(EstimError::NoTreatedUnits);
    }
    if n0 == 0 {
        return Err(EstimError::NoControlUnits);
    }
    Ok((n1, n0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// 1/e for treated, 1/(1-e) for untreated.
    AteUnstabilized,
    /// Unstabilised weights times the marginal probability of the arm received.
    AteStabilized,
    /// Treated 1; untreated e/(1-e) times P(A=0)/P(A=1).
    AttStabilized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    None,
    /// Clamp weights above this empirical quantile (0-100).
    Percentile(f64),
    Cap(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub kind: WeightKind,
    pub weights: Vec<f64>,
    /// Weights before truncation.
    pub raw: Vec<f64>,
    pub truncation: Truncation,
}

impl WeightSet {
    pub fn max(&self) -> f64 {
        self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Kish effective sample size.
    pub fn ess(&self) -> f64 {
        let s = sum(self.weights.iter().copied());
        s * s / sum(self.weights.iter().map(|w| w * w))
    }
}

pub fn make_weights(scores: &[f64], a: &[f64], kind: WeightKind, truncation: Truncation) -> Result<WeightSet, EstimError> {
    if scores.len() != a.len() {
        return Err(EstimError::InvalidArgument("scores and exposure differ in length".into()));
    }
    let (n1, n0) = check_arms(a)?;
    let n = a.len() as f64;
    let (p1, p0) = (n1 as f64 / n, n0 as f64 / n);
    let bad = scores
        .iter()
        .zip(a)
        .filter(|(&e, &ai)| match kind {
            WeightKind::AttStabilized => ai == 0.0 && e >= 1.0,
            _ => (ai == 1.0 && e <= 0.0) || (ai == 0.0 && e >= 1.0),
        })
        .count();
    if bad > 0 {
        return Err(EstimError::PositivityViolation { count: bad });
    }
    let raw: Vec<f64> = scores
        .iter()
        .zip(a)
        .map(|(&e, &ai)| match (kind, ai == 1.0) {
            (WeightKind::AteUnstabilized, true) => 1.0 / e,
            (WeightKind::AteUnstabilized, false) => 1.0 / (1.0 - e),
            (WeightKind::AteStabilized, true) => p1 / e,
            (WeightKind::AteStabilized, false) => p0 / (1.0 - e),
            (WeightKind::AttStabilized, true) => 1.0,
            (WeightKind::AttStabilized, false) => e / (1.0 - e) * p0 / p1,
        })
        .collect();
    let weights = truncate(&raw, truncation)?;
    Ok(WeightSet {
        kind,
        weights,
        raw,
        truncation,
    })
}

/// Clamps weights from above; weights below the cap are untouched.
pub fn truncate(weights: &[f64], truncation: Truncation) -> Result<Vec<f64>, EstimError> {
    let cap = match truncation {
        Truncation::None => return Ok(weights.to_vec()),
        Truncation::Cap(c) => c,
        Truncation::Percentile(p) => {
            if !(0.0..=100.0).contains(&p) {
                return Err(EstimError::InvalidArgument(format!("percentile {p} outside [0, 100]")));
            }
            quantile_sorted(&sorted(weights), p / 100.0)
        }
    };
    if cap.is_nan() || cap <= 0.0 {
        return Err(EstimError::InvalidArgument(format!("weight cap {cap} must be positive")));
    }
    Ok(weights.iter().map(|&w| w.min(cap)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strata {
    /// Stratum index per row, 0-based.
    pub assignment: Vec<usize>,
    pub count: usize,
    /// Upper cut points between consecutive strata.
    pub cuts: Vec<f64>,
}

impl Strata {
    /// Strata from an externally supplied grouping (e.g. a discrete confounder).
    pub fn from_assignment(assignment: Vec<usize>) -> Self {
        let count = assignment.iter().copied().max().map_or(0, |m| m + 1);
        Self {
            assignment,
            count,
            cuts: vec![],
        }
    }

    /// Checks that every stratum holds both arms.
    pub fn check(&self, a: &[f64]) -> Result<(), EstimError> {
        let mut seen = vec![[false; 2]; self.count];
        for (&s, &ai) in self.assignment.iter().zip(a) {
            seen[s][usize::from(ai == 1.0)] = true;
        }
        match seen.iter().position(|arms| !(arms[0] && arms[1])) {
            Some(stratum) => Err(EstimError::EmptyArmInStratum { stratum }),
            None => Ok(()),
        }
    }

    /// Weights reproducing the stratified ATE contrast: n_j / n_aj per unit.
    pub fn ate_weights(&self, a: &[f64]) -> Vec<f64> {
        let mut counts = vec![[0usize; 2]; self.count];
        for (&s, &ai) in self.assignment.iter().zip(a) {
            counts[s][usize::from(ai == 1.0)] += 1;
        }
        self.assignment
            .iter()
            .zip(a)
            .map(|(&s, &ai)| {
                let c = counts[s];
                (c[0] + c[1]) as f64 / c[usize::from(ai == 1.0)] as f64
            })
            .collect()
    }
}

/// Groups units into `j` strata at the type-7 empirical quantiles of the
/// score; a score equal to a cut point falls in the lower stratum.
pub fn stratify_by_ps(scores: &[f64], a: &[f64], j: usize) -> Result<Strata, EstimError> {
    if j < 1 {
        return Err(EstimError::InvalidArgument("need at least one stratum".into()));
    }
    let s = sorted(scores);
    let cuts: Vec<f64> = (1..j).map(|k| quantile_sorted(&s, k as f64 / j as f64)).collect();
    let assignment = scores.iter().map(|&e| cuts.iter().filter(|&&c| c < e).count()).collect();
    let strata = Strata {
        assignment,
        count: j,
        cuts,
    };
    strata.check(a)?;
    Ok(strata)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRow {
    pub covariate: String,
    pub smd_before: f64,
    pub smd_after: f64,
    pub variance_ratio_before: f64,
    pub variance_ratio_after: f64,
    /// Covariate constant in both arms; SMDs reported as 0.
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceTable {
    pub rows: Vec<BalanceRow>,
}

impl BalanceTable {
    pub fn max_abs_smd_after(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.smd_after.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_smd_before(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.smd_before.abs())
            .fold(0.0, f64::max)
    }
}

/// Balance of every adjustment column before and after an adjustment
/// expressed as unit weights (IPW weights, stratum weights from
/// [`Strata::ate_weights`], or match counts). The pooled SD in the SMD
/// denominator is always the unadjusted one, so before and after share a scale.
pub fn balance_check(frame: &AnalysisFrame, weights: Option<&[f64]>) -> Result<BalanceTable, EstimError> {
    check_arms(&frame.a)?;
    let n = frame.len();
    let ones = vec![1.0; n];
    let w = weights.unwrap_or(&ones);
    if w.len() != n {
        return Err(EstimError::InvalidArgument("weights and frame differ in length".into()));
    }
    let mut rows = Vec::new();
    for (label, col) in &frame.confounders {
        let (t, c) = split(col, &frame.a);
        let (wt, wc) = split(w, &frame.a);
        let (ut, uc) = (vec![1.0; t.len()], vec![1.0; c.len()]);
        let pooled_sd = ((var_or_zero(&t) + var_or_zero(&c)) / 2.0).sqrt();
        let zero_variance = pooled_sd == 0.0;
        let smd = |wt: &[f64], wc: &[f64]| {
            if zero_variance {
                0.0
            } else {
                (weighted_mean(&t, wt) - weighted_mean(&c, wc)) / pooled_sd
            }
        };
        let vr = |wt: &[f64], wc: &[f64]| weighted_variance(&t, wt) / weighted_variance(&c, wc);
        rows.push(BalanceRow {
            covariate: label.clone(),
            smd_before: smd(&ut, &uc),
            smd_after: smd(&wt, &wc),
            variance_ratio_before: vr(&ut, &uc),
            variance_ratio_after: vr(&wt, &wc),
            zero_variance,
        });
    }
    Ok(BalanceTable { rows })
}

fn var_or_zero(v: &[f64]) -> f64 {
    if v.len() < 2 {
        0.0
    } else {
        variance(v)
    }
}

fn split(values: &[f64], a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let t = values.iter().zip(a).filter(|(_, &ai)| ai == 1.0).map(|(&v, _)| v).collect();
    let c = values.iter().zip(a).filter(|(_, &ai)| ai != 1.0).map(|(&v, _)| v).collect();
    (t, c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmScores {
    pub min: f64,
    pub max: f64,
    /// 5th, 25th, 50th, 75th and 95th percentiles.
    pub quantiles: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub treated: ArmScores,
    pub untreated: ArmScores,
    /// Share of all units whose score lies outside the other arm's [min, max].
    pub fraction_outside: f64,
    /// Shared mass of the two arms' score histograms on 50 equal bins of
    /// [0, 1]; 1 means identical distributions, 0 disjoint ones.
    pub overlap_coefficient: f64,
}

pub const OVERLAP_BINS: usize = 50;

pub fn overlap_check(scores: &[f64], a: &[f64]) -> Result<OverlapReport, EstimError> {
    check_arms(a)?;
    let (t, c) = split(scores, a);
    let arm = |v: &[f64]| {
        let s = sorted(v);
        ArmScores {
            min: s[0],
            max: s[s.len() - 1],
            quantiles: [0.05, 0.25, 0.5, 0.75, 0.95].map(|p| quantile_sorted(&s, p)),
        }
    };
    let (at, ac) = (arm(&t), arm(&c));
    let outside = t.iter().filter(|&&e| e < ac.min || e > ac.max).count()
        + c.iter().filter(|&&e| e < at.min || e > at.max).count();
    let hist = |v: &[f64]| {
        let mut h = vec![0.0; OVERLAP_BINS];
        for &e in v {
            let b = ((e * OVERLAP_BINS as f64) as usize).min(OVERLAP_BINS - 1);
            h[b] += 1.0;
        }
        let total = v.len() as f64;
        h.iter().map(|x| x / total).collect::<Vec<f64>>()
    };
    let (ht, hc) = (hist(&t), hist(&c));
    let ovl = sum(ht.iter().zip(&hc).map(|(x, y)| x.min(*y)));
    Ok(OverlapReport {
        treated: at,
        untreated: ac,
        fraction_outside: outside as f64 / scores.len() as f64,
        overlap_coefficient: ovl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimands::{Contrast, EstimandSpec, Exposure};

    fn f8() -> AnalysisFrame {
        let l = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let a = vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let y = vec![5.0, 7.0, 9.0, 11.0, 10.0, 16.0, 18.0, 20.0];
        AnalysisFrame::from_parts(EstimandSpec::new(Contrast::Ate, Exposure::A2), y, a, vec![("l".into(), l)])
    }

    #[test]
    fn saturated_scores_on_fixture() {
        let fit = fit_ps(&f8()).unwrap();
        for (i, e) in fit.scores.iter().enumerate() {
            let expect = if i < 4 { 0.5 } else { 0.75 };
            assert!((e - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn no_confounders_gives_treated_share() {
        let f = f8().without(&["l"]);
        let fit = fit_ps(&f).unwrap();
        assert!(fit.scores.iter().all(|&e| (e - 5.0 / 8.0).abs() < 1e-10));
    }

    #[test]
    fn weight_formulas() {
        let f = f8();
        let e = [0.5, 0.5, 0.5, 0.5, 0.75, 0.75, 0.75, 0.75];
        let w = make_weights(&e, &f.a, WeightKind::AttStabilized, Truncation::None).unwrap();
        assert!((w.weights[4] - 1.8).abs() < 1e-12);
        assert!((w.weights[0] - 0.6).abs() < 1e-12);
        assert_eq!(w.weights[2], 1.0);
        let half = [0.5; 8];
        let u = make_weights(&half, &f.a, WeightKind::AteUnstabilized, Truncation::None).unwrap();
        assert!(u.weights.iter().all(|&w| w == 2.0));
        let pinned = [1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
        assert_eq!(
            make_weights(&pinned, &f.a, WeightKind::AteStabilized, Truncation::None).unwrap_err(),
            EstimError::PositivityViolation { count: 1 }
        );
    }

    #[test]
    fn cap_and_percentile_truncation() {
        assert_eq!(truncate(&[1.0, 2.0, 100.0], Truncation::Cap(10.0)).unwrap(), vec![1.0, 2.0, 10.0]);
        let w: Vec<f64> = (1..=101).map(f64::from).collect();
        let t = truncate(&w, Truncation::Percentile(99.0)).unwrap();
        assert_eq!(t[..100], w[..100]);
        assert_eq!(t[100], 100.0);
    }

    #[test]
    fn two_strata_on_fixture_are_the_confounder_groups() {
        let f = f8();
        let e = [0.5, 0.5, 0.5, 0.5, 0.75, 0.75, 0.75, 0.75];
        let s = stratify_by_ps(&e, &f.a, 2).unwrap();
        assert_eq!(s.assignment, vec![0, 0, 0, 0, 1, 1, 1, 1]);
        let flat = [0.3; 8];
        assert_eq!(
            stratify_by_ps(&flat, &f.a, 2).unwrap_err(),
            EstimError::EmptyArmInStratum { stratum: 1 }
        );
    }

    #[test]
    fn correct_weights_balance_fixture_exactly() {
        let f = f8();
        let e = [0.5, 0.5, 0.5, 0.5, 0.75, 0.75, 0.75, 0.75];
        let w = make_weights(&e, &f.a, WeightKind::AteUnstabilized, Truncation::None).unwrap();
        let t = balance_check(&f, Some(&w.weights)).unwrap();
        assert!(t.rows[0].smd_after.abs() < 1e-12);
        assert!(t.rows[0].smd_before > 0.0);
        let strata = Strata::from_assignment(vec![0, 0, 0, 0, 1, 1, 1, 1]);
        let ts = balance_check(&f, Some(&strata.ate_weights(&f.a))).unwrap();
        assert!(ts.rows[0].smd_after.abs() < 1e-12);
    }

    #[test]
    fn overlap_extremes() {
        let a = [0.0, 0.0, 1.0, 1.0];
        let same = overlap_check(&[0.4; 4], &a).unwrap();
        assert_eq!(same.fraction_outside, 0.0);
        assert!((same.overlap_coefficient - 1.0).abs() < 1e-12);
        let apart = overlap_check(&[0.1, 0.2, 0.8, 0.9], &a).unwrap();
        assert_eq!(apart.fraction_outside, 1.0);
        assert_eq!(apart.overlap_coefficient, 0.0);
    }
}
