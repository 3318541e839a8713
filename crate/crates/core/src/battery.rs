//! Fixed batteries of estimators for the offer, uptake and initiation
//! contrasts, in a fixed row order with the crude contrast first.

use crate::error::EstimError;
use crate::estimands::{resolve, resolve_iv, AnalysisFrame, Contrast, Dataset, EstimandSpec, EstimateReport, Exposure, World};
use crate::inference::{bootstrap_many, BootstrapPlan};
use crate::iv::{smm_att, tsls, wald};
use crate::nuc::{aipw, crude, fit_outcome_model, ipw, matching, or_ate, or_att, ps_regression, stratification_ate, stratification_att, MatchConfig};
use crate::propensity::{balance_check, fit_ps, make_weights, overlap_check, stratify_by_ps, BalanceTable, OverlapReport, Strata, Truncation, WeightKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatteryKind {
    /// Randomised offer.
    Offer,
    /// Programme uptake.
    Uptake,
    /// Breastfeeding initiation with the offer set to the given value.
    Initiation(bool),
}

impl BatteryKind {
    pub fn label(self) -> &'static str {
        match self {
            BatteryKind::Offer => "a1",
            BatteryKind::Uptake => "a2",
            BatteryKind::Initiation(false) => "a3|a1=0",
            BatteryKind::Initiation(true) => "a3|a1=1",
        }
    }

    pub fn spec(self, contrast: Contrast) -> EstimandSpec {
        match self {
            BatteryKind::Offer => EstimandSpec::new(contrast, Exposure::A1),
            BatteryKind::Uptake => EstimandSpec::new(contrast, Exposure::A2),
            BatteryKind::Initiation(v) => EstimandSpec::new(contrast, Exposure::A3).in_world(World::Offer(v)),
        }
    }
}

/// Method keys accepted in `BatteryOptions::methods`, in battery order.
pub const METHOD_KEYS: [&str; 11] = [
    "crude", "ra", "ra-int", "strat", "ps-reg", "match", "ipw", "dr", "iv-wald", "iv-2sls", "iv-smm",
];

/// Rejects unknown method keys before any computation starts.
pub fn check_methods(keys: &[String]) -> Result<(), EstimError> {
    match keys.iter().find(|k| !METHOD_KEYS.contains(&k.as_str())) {
        Some(k) => Err(EstimError::InvalidArgument(format!(
            "unknown method `{k}`; expected one of {}",
            METHOD_KEYS.join(", ")
        ))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryOptions {
    /// `None` keeps the provisional analytic standard errors.
    pub bootstrap: Option<BootstrapPlan>,
    pub strata: usize,
    pub match_counts: Vec<usize>,
    pub truncation: Truncation,
    /// Restrict the battery to these method keys. The crude row is always
    /// emitted. Naming an IV method forces it even where the instrument is
    /// not valid, in which case the row carries the resolver's refusal.
    pub methods: Option<Vec<String>>,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        Self {
            bootstrap: Some(BootstrapPlan::default()),
            strata: 6,
            match_counts: vec![1, 3],
            truncation: Truncation::None,
            methods: None,
        }
    }
}

impl BatteryOptions {
    fn wants(&self, key: &str) -> bool {
        self.methods.as_ref().is_none_or(|m| m.iter().any(|k| k == key))
    }

    fn names(&self, key: &str) -> bool {
        self.methods.as_ref().is_some_and(|m| m.iter().any(|k| k == key))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryRow {
    pub spec: EstimandSpec,
    /// One of `METHOD_KEYS`.
    pub key: &'static str,
    pub method: String,
    pub outcome: Result<EstimateReport, EstimError>,
}

/// Statistics recomputed on every bootstrap replicate, in vector order.
const BOOTSTRAPPED: [(Contrast, &str); 8] = [
    (Contrast::Ate, "ra-int"),
    (Contrast::Ate, "strat"),
    (Contrast::Ate, "ps-reg"),
    (Contrast::Ate, "ipw"),
    (Contrast::Ate, "dr"),
    (Contrast::Att, "ra-int"),
    (Contrast::Att, "strat"),
    (Contrast::Att, "ipw"),
];

fn bootstrap_slot(contrast: Contrast, key: &str) -> Option<usize> {
    BOOTSTRAPPED.iter().position(|(c, k)| *c == contrast && *k == key)
}

/// Every bootstrapped statistic on one frame, NaN where a statistic fails.
fn replicate(frame: &AnalysisFrame, opts: &BatteryOptions) -> Result<Vec<f64>, EstimError> {
    let nan = f64::NAN;
    let est = |r: Result<EstimateReport, EstimError>| r.map_or(nan, |r| r.estimate);
    let ps = fit_ps(frame)?;
    let strata = stratify_by_ps(&ps.scores, &frame.a, opts.strata);
    let w_ate = make_weights(&ps.scores, &frame.a, WeightKind::AteStabilized, opts.truncation);
    let w_att = make_weights(&ps.scores, &frame.a, WeightKind::AttStabilized, opts.truncation);
    let outcome = fit_outcome_model(frame, true);
    Ok(vec![
        est(or_ate(frame, true)),
        strata.as_ref().map_or(nan, |s| est(stratification_ate(frame, s))),
        est(ps_regression(frame, &ps.scores)),
        w_ate.as_ref().map_or(nan, |w| est(ipw(frame, w, Contrast::Ate))),
        outcome.as_ref().map_or(nan, |m| est(aipw(frame, &ps.scores, m))),
        est(or_att(frame)),
        strata.as_ref().map_or(nan, |s| est(stratification_att(frame, s))),
        w_att.as_ref().map_or(nan, |w| est(ipw(frame, w, Contrast::Att))),
    ])
}

fn row(spec: EstimandSpec, key: &'static str, method: &str, outcome: Result<EstimateReport, EstimError>) -> BatteryRow {
    let outcome = outcome.map(|mut r| {
        r.spec = spec;
        r.method = method.to_string();
        r
    });
    BatteryRow {
        spec,
        key,
        method: method.to_string(),
        outcome,
    }
}

/// Runs the battery for `kind` on `data`. Per-row failures are recorded in
/// the row; only a frame that cannot be resolved at all fails every row.
pub fn run_battery(data: &Dataset, kind: BatteryKind, opts: &BatteryOptions) -> Vec<BatteryRow> {
    let ate = kind.spec(Contrast::Ate);
    let att = kind.spec(Contrast::Att);
    let frame = match resolve(&ate, data) {
        Ok(f) => f,
        Err(e) => return vec![row(ate, "crude", "crude regression", Err(e.into()))],
    };
    let mut rows = vec![row(ate, "crude", "crude regression", crude(&frame))];
    let iv_wanted = |key: &str| if kind == BatteryKind::Uptake { opts.wants(key) } else { opts.names(key) };
    if kind == BatteryKind::Offer {
        push_iv_rows(&mut rows, data, ate, att, &iv_wanted);
        return rows;
    }
    let att_frame = AnalysisFrame {
        spec: att,
        ..frame.clone()
    };
    let ps = fit_ps(&frame);
    let scores = ps.as_ref().map(|p| p.scores.clone()).map_err(Clone::clone);
    let with_scores = |f: &dyn Fn(&[f64]) -> Result<EstimateReport, EstimError>| scores.as_ref().map_err(Clone::clone).and_then(|s| f(s));
    let strata = || scores.as_ref().map_err(Clone::clone).and_then(|s| stratify_by_ps(s, &frame.a, opts.strata));
    let weights = |kind: WeightKind| with_weights(&scores, &frame.a, kind, opts.truncation);
    let strat_label = format!("PS stratification ({} strata)", opts.strata);

    let mut ate_rows = Vec::new();
    if opts.wants("ra") {
        ate_rows.push(row(ate, "ra", "regression adjustment (without interactions)", or_ate(&frame, false)));
    }
    if opts.wants("ra-int") {
        ate_rows.push(row(ate, "ra-int", "regression adjustment (with interactions)", or_ate(&frame, true)));
    }
    let strat_ate = opts
        .wants("strat")
        .then(|| row(ate, "strat", &strat_label, strata().and_then(|s| stratification_ate(&frame, &s))));
    let ps_reg = opts
        .wants("ps-reg")
        .then(|| row(ate, "ps-reg", "regression with PS", with_scores(&|s| ps_regression(&frame, s))));
    // the initiation table lists PS regression before stratification
    if kind == BatteryKind::Uptake {
        ate_rows.extend(strat_ate.into_iter().chain(ps_reg));
    } else {
        ate_rows.extend(ps_reg.into_iter().chain(strat_ate));
    }
    if opts.wants("match") {
        for &m in &opts.match_counts {
            let label = match_label(m);
            ate_rows.push(row(ate, "match", &label, with_scores(&|s| matching(&frame, s, &MatchConfig::with_m(m), Contrast::Ate).map(|r| r.0))));
        }
    }
    if opts.wants("ipw") {
        ate_rows.push(row(ate, "ipw", "PS IPW", weights(WeightKind::AteStabilized).and_then(|w| ipw(&frame, &w, Contrast::Ate))));
    }
    if opts.wants("dr") {
        ate_rows.push(row(
            ate,
            "dr",
            "PS DR IPW",
            fit_outcome_model(&frame, true).and_then(|m| with_scores(&|s| aipw(&frame, s, &m))),
        ));
    }
    rows.extend(ate_rows);
    push_iv_rows(&mut rows, data, ate, att, &iv_wanted);

    if opts.wants("ra-int") {
        rows.push(row(att, "ra-int", "regression adjustment (with interactions)", or_att(&att_frame)));
    }
    if opts.wants("strat") {
        rows.push(row(att, "strat", &strat_label, strata().and_then(|s| stratification_att(&att_frame, &s))));
    }
    if opts.wants("match") {
        for &m in &opts.match_counts {
            let label = match_label(m);
            rows.push(row(att, "match", &label, with_scores(&|s| matching(&att_frame, s, &MatchConfig::with_m(m), Contrast::Att).map(|r| r.0))));
        }
    }
    if opts.wants("ipw") {
        rows.push(row(att, "ipw", "PS IPW", weights(WeightKind::AttStabilized).and_then(|w| ipw(&att_frame, &w, Contrast::Att))));
    }

    let needs_bootstrap = rows.iter().any(|r| r.outcome.is_ok() && bootstrap_slot(r.spec.contrast, r.key).is_some());
    if let (Some(plan), true) = (&opts.bootstrap, needs_bootstrap) {
        let summaries = bootstrap_many(frame.len(), BOOTSTRAPPED.len(), plan, |idx| replicate(&frame.resample(idx), opts));
        for r in rows.iter_mut() {
            let Some(slot) = bootstrap_slot(r.spec.contrast, r.key) else { continue };
            if let Ok(report) = &mut r.outcome {
                match &summaries[slot] {
                    Ok(s) => *report = report.clone().with_bootstrap(s.se, s.ci95).with_diagnostic("bootstrap_failed", s.failed as f64),
                    Err(e) => report.warnings.push(format!("bootstrap abandoned: {e}")),
                }
            }
        }
    }
    rows
}

fn push_iv_rows(rows: &mut Vec<BatteryRow>, data: &Dataset, ate: EstimandSpec, att: EstimandSpec, wanted: &dyn Fn(&str) -> bool) {
    let plain = || resolve_iv(&ate, data, false).map_err(EstimError::from);
    if wanted("iv-wald") {
        rows.push(row(ate, "iv-wald", "IV (Wald)", plain().and_then(|f| wald(&f))));
    }
    if wanted("iv-2sls") {
        let adjusted = resolve_iv(&ate, data, true).map_err(EstimError::from);
        rows.push(row(ate, "iv-2sls", "IV (2SLS, adjusted)", adjusted.and_then(|f| tsls(&f))));
    }
    if wanted("iv-smm") {
        rows.push(row(att, "iv-smm", "IV (structural mean model)", plain().and_then(|f| smm_att(&f).map(|r| r.0))));
    }
}

fn with_weights(
    scores: &Result<Vec<f64>, EstimError>,
    a: &[f64],
    kind: WeightKind,
    truncation: Truncation,
) -> Result<crate::propensity::WeightSet, EstimError> {
    scores.as_ref().map_err(Clone::clone).and_then(|s| make_weights(s, a, kind, truncation))
}

fn match_label(m: usize) -> String {
    format!("PS matching ({m} match{})", if m == 1 { "" } else { "es" })
}

/// Balance and overlap of the propensity model behind a battery.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceSummary {
    pub spec: EstimandSpec,
    pub weighting: BalanceTable,
    pub stratification: BalanceTable,
    pub matching: BalanceTable,
    pub overlap: OverlapReport,
}

pub fn balance_summary(data: &Dataset, kind: BatteryKind, opts: &BatteryOptions) -> Result<BalanceSummary, EstimError> {
    let spec = kind.spec(Contrast::Ate);
    let frame = resolve(&spec, data)?;
    let ps = fit_ps(&frame)?;
    let weights = make_weights(&ps.scores, &frame.a, WeightKind::AteStabilized, opts.truncation)?;
    let strata: Strata = stratify_by_ps(&ps.scores, &frame.a, opts.strata)?;
    let m = opts.match_counts.first().copied().unwrap_or(1);
    let (_, matches) = matching(&frame, &ps.scores, &MatchConfig::with_m(m), Contrast::Ate)?;
    Ok(BalanceSummary {
        spec,
        weighting: balance_check(&frame, Some(&weights.weights))?,
        stratification: balance_check(&frame, Some(&strata.ate_weights(&frame.a)))?,
        matching: balance_check(&frame, Some(&matches.balance_weights(frame.len())))?,
        overlap: overlap_check(&ps.scores, &frame.a)?,
    })
}
