//! Standard errors: nonparametric bootstrap, heteroscedasticity-robust
//! sandwich for weighted regressions, and the homoscedastic matching variance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::EstimError;
use crate::estimands::{AnalysisFrame, Contrast};
use crate::exec::Execution;
use crate::numkit::{wls_fit, DesignMatrix, NumError, RegressionFit};
use crate::nuc::Matches;
use crate::stats::{quantile_sorted, std_dev, sum};

/// Share of failed replicates above which a bootstrap is abandoned.
pub const MAX_FAILED_SHARE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapPlan {
    pub replicates: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for BootstrapPlan {
    fn default() -> Self {
        Self {
            replicates: 1000,
            seed: 1,
            exec: Execution::Parallel,
        }
    }
}

impl BootstrapPlan {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            ..Self::default()
        }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub se: f64,
    /// 2.5% and 97.5% quantiles of the replicate estimates.
    pub ci95: (f64, f64),
    pub failed: usize,
    /// Successful replicate estimates, sorted.
    pub replicates: Vec<f64>,
}

/// Row indices of replicate `replicate`: `n` draws with replacement from a
/// ChaCha stream keyed by the plan seed and the replicate number.
pub fn resample_indices(n: usize, seed: u64, replicate: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Bootstraps several statistics computed by one closure. A replicate that
/// returns `Err` fails for every statistic; a non-finite entry fails only
/// its own statistic. Each statistic is summarised separately and errors
/// when more than 5% of its replicates failed.
pub fn bootstrap_many<F>(n: usize, k: usize, plan: &BootstrapPlan, estimator: F) -> Vec<Result<BootstrapSummary, EstimError>>
where
    F: Fn(&[usize]) -> Result<Vec<f64>, EstimError> + Sync + Send,
{
    if plan.replicates < 2 || n == 0 {
        return (0..k)
            .map(|_| Err(EstimError::InvalidArgument("bootstrap needs at least 2 replicates and 1 row".into())))
            .collect();
    }
    let runs: Vec<Option<Vec<f64>>> = plan.exec.map_range(plan.replicates, |b| {
        let idx = resample_indices(n, plan.seed, b);
        estimator(&idx).ok().filter(|v| v.len() == k)
    });
    (0..k)
        .map(|j| {
            let mut ok: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.as_ref().map(|v| v[j]))
                .filter(|v| v.is_finite())
                .collect();
            let failed = plan.replicates - ok.len();
            if failed as f64 > MAX_FAILED_SHARE * plan.replicates as f64 || ok.len() < 2 {
                return Err(EstimError::TooManyFailedReplicates {
                    failed,
                    total: plan.replicates,
                });
            }
            ok.sort_by(f64::total_cmp);
            Ok(BootstrapSummary {
                se: std_dev(&ok),
                ci95: (quantile_sorted(&ok, 0.025), quantile_sorted(&ok, 0.975)),
                failed,
                replicates: ok,
            })
        })
        .collect()
}

pub fn bootstrap_se<F>(n: usize, plan: &BootstrapPlan, estimator: F) -> Result<BootstrapSummary, EstimError>
where
    F: Fn(&[usize]) -> Result<f64, EstimError> + Sync + Send,
{
    bootstrap_many(n, 1, plan, |idx| estimator(idx).map(|v| vec![v]))
        .pop()
        .expect("one statistic")
}

/// Weighted least squares with the HC0 sandwich covariance
/// `(X'WX)^-1 X' W diag(r^2) W X (X'WX)^-1`.
pub fn weighted_sandwich(x: &DesignMatrix, y: &[f64], w: &[f64]) -> Result<(RegressionFit, DMatrix<f64>), EstimError> {
    let fit = wls_fit(x, y, w)?;
    let xv = x.values();
    let p = x.columns();
    let mut bread = DMatrix::<f64>::zeros(p, p);
    let mut meat = DMatrix::<f64>::zeros(p, p);
    let beta: &DVector<f64> = &fit.coefficients;
    for i in 0..x.rows() {
        let row = xv.row(i).transpose();
        let r = y[i] - row.dot(beta);
        bread.ger(w[i], &row, &row, 1.0);
        meat.ger(w[i] * w[i] * r * r, &row, &row, 1.0);
    }
    let inv = bread.cholesky().ok_or(NumError::RankDeficient {
        columns: x.labels().to_vec(),
    })?;
    let binv = inv.inverse();
    let cov = &binv * meat * &binv;
    Ok((fit, cov))
}

/// Weighted regression of `y` on `(1, a)`: the `a` coefficient and its
/// HC0 standard error.
pub fn sandwich_se_weighted(y: &[f64], a: &[f64], w: &[f64]) -> Result<(f64, f64), EstimError> {
    if y.len() != a.len() || w.len() != a.len() {
        return Err(NumError::DimensionMismatch {
            what: "weighted regression inputs",
            expected: y.len(),
            found: if w.len() != y.len() { w.len() } else { a.len() },
        }
        .into());
    }
    let x = DesignMatrix::with_intercept(vec!["a".into()], &[a])?;
    let (fit, cov) = weighted_sandwich(&x, y, w)?;
    Ok((fit.coefficients[1], cov[(1, 1)].max(0.0).sqrt()))
}

/// Abadie-Imbens variance of a nearest-neighbour matching estimator under a
/// homoscedastic conditional outcome variance.
///
/// The conditional variance is pooled from each unit's discrepancy with its
/// nearest same-arm neighbour on the score, `(y_i - y_l)^2 / 2`. Reuse of
/// units as matches enters through `k1_j = sum 1/|S|` and `k2_j = sum 1/|S|^2`
/// over the match sets `S` that contain unit `j` (with `M` matches and no
/// ties these are `K/M` and `K/M^2`).
pub fn matching_se(frame: &AnalysisFrame, scores: &[f64], matches: &Matches) -> Result<f64, EstimError> {
    let n_units = matches.units.len();
    if n_units < 2 {
        return Err(EstimError::InsufficientMatches);
    }
    let sigma2 = pooled_neighbour_variance(&frame.y, &frame.a, scores)?;
    let n = frame.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    for set in &matches.sets {
        let s = set.len() as f64;
        for &j in set {
            k1[j] += 1.0 / s;
            k2[j] += 1.0 / (s * s);
        }
    }
    let tau = matches.estimate;
    let contrasts = matches.units.iter().zip(&matches.imputed).map(|(&i, &imp)| {
        let d = if frame.a[i] == 1.0 { frame.y[i] - imp } else { imp - frame.y[i] };
        (d - tau).powi(2)
    });
    let first = sum(contrasts);
    let reuse = match matches.target {
        Contrast::Att => sum((0..n).filter(|&j| frame.a[j] != 1.0).map(|j| k1[j] * k1[j] - k2[j])),
        _ => sum((0..n).map(|j| 2.0 * k1[j] + k1[j] * k1[j] - k2[j])),
    };
    let nn = n_units as f64;
    Ok(((first + sigma2 * reuse) / (nn * nn)).max(0.0).sqrt())
}

/// Mean of `(y_i - y_l)^2 / 2` over units with a same-arm neighbour `l`
/// (closest score, lower index on ties).
fn pooled_neighbour_variance(y: &[f64], a: &[f64], scores: &[f64]) -> Result<f64, EstimError> {
    let mut total = Vec::new();
    for arm in [0.0, 1.0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| a[i] == arm).collect();
        if idx.len() < 2 {
            continue;
        }
        idx.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));
        for (p, &i) in idx.iter().enumerate() {
            let mut best: Option<(f64, usize)> = None;
            // the nearest score is adjacent in sorted order, but equal scores
            // may sit further along; scan both runs of ties
            let mut consider = |j: usize| {
                let d = (scores[i] - scores[j]).abs();
                if best.is_none_or(|(bd, bj)| d < bd || (d == bd && j < bj)) {
                    best = Some((d, j));
                }
            };
            let mut q = p;
            while q > 0 {
                q -= 1;
                consider(idx[q]);
                if scores[idx[q]] != scores[i] {
                    break;
                }
            }
            let mut q = p + 1;
            while q < idx.len() {
                consider(idx[q]);
                if scores[idx[q]] != scores[i] {
                    break;
                }
                q += 1;
            }
            let (_, l) = best.expect("arm has two units");
            total.push((y[i] - y[l]).powi(2) / 2.0);
        }
    }
    if total.is_empty() {
        return Err(EstimError::InsufficientMatches);
    }
    Ok(sum(total.iter().copied()) / total.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_statistic_has_zero_se() {
        let s = bootstrap_se(50, &BootstrapPlan::new(200, 3), |_| Ok(4.0)).unwrap();
        assert_eq!(s.se, 0.0);
        assert_eq!(s.ci95, (4.0, 4.0));
    }

    #[test]
    fn replicates_do_not_depend_on_execution() {
        let y: Vec<f64> = (0..300).map(|i| ((i * 37) % 101) as f64).collect();
        let f = |idx: &[usize]| Ok(idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64);
        let a = bootstrap_se(y.len(), &BootstrapPlan::new(200, 9), f).unwrap();
        let b = bootstrap_se(y.len(), &BootstrapPlan::new(200, 9).with_exec(Execution::Sequential), f).unwrap();
        assert_eq!(a, b);
        assert!(a.se > 0.0);
    }

    #[test]
    fn failure_cap() {
        let plan = BootstrapPlan::new(100, 1);
        let f = |idx: &[usize]| if idx[0].is_multiple_of(10) { Err(EstimError::NoTreatedUnits) } else { Ok(1.0) };
        // replicates whose first draw is a multiple of 10 fail: about 10%
        assert!(matches!(bootstrap_se(100, &plan, f), Err(EstimError::TooManyFailedReplicates { .. })));
        let g = |idx: &[usize]| if idx[0] == 0 && idx[1] == 0 { Err(EstimError::NoTreatedUnits) } else { Ok(1.0) };
        assert_eq!(bootstrap_se(100, &plan, g).unwrap().failed, 0);
    }

    #[test]
    fn hc0_on_two_groups() {
        // unit weights: HC0 variance of a mean difference is sum r^2 / n_g^2 per group
        let y = [1.0, 3.0, 2.0, 6.0, 10.0];
        let a = [0.0, 0.0, 1.0, 1.0, 1.0];
        let (est, se) = sandwich_se_weighted(&y, &a, &[1.0; 5]).unwrap();
        assert!((est - 4.0).abs() < 1e-12);
        let v0: f64 = (1.0 + 1.0) / 4.0;
        let v1 = (16.0 + 0.0 + 16.0) / 9.0;
        assert!((se - (v0 + v1).sqrt()).abs() < 1e-12);
        assert!(sandwich_se_weighted(&y, &a, &[0.0; 5]).is_err());
    }
}
