use serde::{Deserialize, Serialize};

use crate::error::EstimError;
use crate::estimands::{AnalysisFrame, Contrast, EstimateReport, SeMethod};
use crate::inference::matching_se;
use crate::propensity::check_arms;
use crate::stats::{mean, sum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Matches per unit.
    pub m: usize,
    pub with_replacement: bool,
    /// Largest admissible score distance.
    pub caliper: Option<f64>,
    /// Keep every candidate tied with the m-th nearest.
    pub include_ties: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            m: 1,
            with_replacement: true,
            caliper: None,
            include_ties: false,
        }
    }
}

impl MatchConfig {
    pub fn with_m(m: usize) -> Self {
        Self {
            m,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), EstimError> {
        if self.m < 1 {
            return Err(EstimError::InvalidArgument("need at least one match per unit".into()));
        }
        if let Some(c) = self.caliper {
            if c.is_nan() || c <= 0.0 {
                return Err(EstimError::InvalidArgument(format!("caliper {c} must be positive")));
            }
        }
        Ok(())
    }
}

/// Result of nearest-neighbour matching on the propensity score.
#[derive(Debug, Clone, PartialEq)]
pub struct Matches {
    pub target: Contrast,
    /// Units that received matches, in index order.
    pub units: Vec<usize>,
    /// Opposite-arm matches of each entry of `units`.
    pub sets: Vec<Vec<usize>>,
    /// Mean outcome of each match set (the imputed counterfactual).
    pub imputed: Vec<f64>,
    /// Units without a candidate inside the caliper.
    pub dropped: Vec<usize>,
    pub estimate: f64,
}

impl Matches {
    /// Unit weights that reproduce the matched comparison: each matched unit
    /// counts once for itself (ATE: every unit; ATT: treated only) plus
    /// `1/|S|` for every match set `S` it belongs to.
    pub fn balance_weights(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        for &i in &self.units {
            w[i] += 1.0;
        }
        for set in &self.sets {
            for &j in set {
                w[j] += 1.0 / set.len() as f64;
            }
        }
        w
    }
}

/// Nearest-neighbour matching on `|e_i - e_j|` against the opposite arm.
/// Candidates at equal distance are taken in index order. Without
/// replacement, units are processed in index order and a used candidate
/// is unavailable to later units.
pub fn match_units(frame: &AnalysisFrame, scores: &[f64], config: &MatchConfig, target: Contrast) -> Result<Matches, EstimError> {
    config.check()?;
    check_arms(&frame.a)?;
    if scores.len() != frame.len() {
        return Err(EstimError::InvalidArgument("scores and frame differ in length".into()));
    }
    let by_score = |arm: f64| {
        let mut v: Vec<usize> = (0..frame.len()).filter(|&i| frame.a[i] == arm).collect();
        v.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));
        v
    };
    let pools = [by_score(0.0), by_score(1.0)];
    let mut used = [vec![false; pools[0].len()], vec![false; pools[1].len()]];
    let mut out = Matches {
        target,
        units: vec![],
        sets: vec![],
        imputed: vec![],
        dropped: vec![],
        estimate: f64::NAN,
    };
    for i in 0..frame.len() {
        let treated = frame.a[i] == 1.0;
        if target == Contrast::Att && !treated {
            continue;
        }
        let side = usize::from(!treated);
        let found = nearest(&pools[side], &used[side], scores, scores[i], config);
        if found.is_empty() {
            out.dropped.push(i);
            continue;
        }
        if !config.with_replacement {
            for &p in &found {
                used[side][p] = true;
            }
        }
        let set: Vec<usize> = found.iter().map(|&p| pools[side][p]).collect();
        let ys: Vec<f64> = set.iter().map(|&j| frame.y[j]).collect();
        out.imputed.push(mean(&ys));
        out.units.push(i);
        out.sets.push(set);
    }
    if out.units.is_empty() {
        return Err(EstimError::UnmatchedUnits {
            dropped: out.dropped.len(),
        });
    }
    let diffs = out.units.iter().zip(&out.imputed).map(|(&i, &imp)| {
        if frame.a[i] == 1.0 {
            frame.y[i] - imp
        } else {
            imp - frame.y[i]
        }
    });
    out.estimate = sum(diffs) / out.units.len() as f64;
    Ok(out)
}

/// Positions in `pool` of the chosen matches for a unit with score `s`.
fn nearest(pool: &[usize], used: &[bool], scores: &[f64], s: f64, config: &MatchConfig) -> Vec<usize> {
    let start = pool.partition_point(|&j| scores[j] < s);
    // left walks down from start-1, right walks up from start; both yield
    // nondecreasing distances, so merging them visits candidates in order
    let mut left = start;
    let mut right = start;
    let next_left = |mut l: usize| {
        while l > 0 {
            l -= 1;
            if !used[l] {
                return Some(l);
            }
        }
        None
    };
    let next_right = |mut r: usize| {
        while r < pool.len() {
            if !used[r] {
                return Some(r);
            }
            r += 1;
        }
        None
    };
    let mut got: Vec<(f64, usize, usize)> = Vec::new();
    loop {
        let l = next_left(left);
        let r = next_right(right);
        let dl = l.map(|p| (s - scores[pool[p]]).abs());
        let dr = r.map(|p| (scores[pool[p]] - s).abs());
        let take_left = match (dl, dr) {
            (None, None) => break,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a <= b,
        };
        let (d, p) = if take_left { (dl.unwrap(), l.unwrap()) } else { (dr.unwrap(), r.unwrap()) };
        if config.caliper.is_some_and(|c| d > c) {
            break;
        }
        if got.len() >= config.m && d > got[config.m - 1].0 {
            break;
        }
        got.push((d, pool[p], p));
        if take_left {
            left = p;
        } else {
            right = p + 1;
        }
    }
    got.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keep = if config.include_ties {
        got.len()
    } else {
        got.len().min(config.m)
    };
    got.truncate(keep);
    got.into_iter().map(|(_, _, p)| p).collect()
}

/// Matching estimator with the homoscedastic Abadie-Imbens standard error.
/// Bootstrap standard errors are deliberately not offered for matching.
pub fn matching(frame: &AnalysisFrame, scores: &[f64], config: &MatchConfig, target: Contrast) -> Result<(EstimateReport, Matches), EstimError> {
    let m = match_units(frame, scores, config, target)?;
    let se = matching_se(frame, scores, &m)?;
    let label = format!("PS matching ({} match{})", config.m, if config.m == 1 { "" } else { "es" });
    let mut report = EstimateReport::new(frame.spec, &label, m.estimate, se, SeMethod::AbadieImbens)
        .with_diagnostic("matched_units", m.units.len() as f64)
        .with_diagnostic("dropped_units", m.dropped.len() as f64);
    if !m.dropped.is_empty() {
        report = report.with_warning(format!(
            "{} unit(s) had no match within the caliper and were dropped; the estimand covers matched units only",
            m.dropped.len()
        ));
    }
    Ok((report, m))
}
