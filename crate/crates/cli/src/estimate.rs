use std::io::Write;

use causal_workbench::battery::{balance_summary, run_battery, BatteryOptions, BatteryRow};
use causal_workbench::estimands::{CiKind, Dataset};
use causal_workbench::inference::BootstrapPlan;
use causal_workbench::propensity::{ArmScores, BalanceTable, Truncation};
use causal_workbench::simlearner::load_dataset;

use crate::output::{create, real, CsvOut};
use crate::{BalanceArgs, CliError, EstimateArgs, EstimationArgs};

pub(crate) const RESULT_COLUMNS: [&str; 13] = [
    "battery",
    "estimand",
    "method_key",
    "method",
    "estimate",
    "se",
    "se_method",
    "ci_low",
    "ci_high",
    "ci_kind",
    "diagnostics",
    "warnings",
    "error",
];

fn options(common: &EstimationArgs) -> Result<BatteryOptions, CliError> {
    if common.matches.contains(&0) {
        return Err(CliError::Invalid("--matches must be positive".into()));
    }
    let truncation = match common.truncate {
        None => Truncation::None,
        Some(p) if (0.0..=100.0).contains(&p) => Truncation::Percentile(p),
        Some(p) => return Err(CliError::Invalid(format!("--truncate {p} is not a percentile"))),
    };
    Ok(BatteryOptions {
        bootstrap: None,
        strata: common.strata,
        match_counts: common.matches.clone(),
        truncation,
        methods: None,
    })
}

fn load(common: &EstimationArgs) -> Result<Dataset, CliError> {
    Ok(load_dataset(&common.data)?)
}

fn sink(common: &EstimationArgs) -> Result<Box<dyn Write>, CliError> {
    Ok(match &common.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout()),
    })
}

fn result_row(battery: &str, r: &BatteryRow) -> Vec<String> {
    let mut row = vec![battery.to_string(), r.spec.to_string(), r.key.to_string(), r.method.clone()];
    match &r.outcome {
        Ok(rep) => {
            let diagnostics: Vec<String> = rep.diagnostics.iter().map(|(k, v)| format!("{k}={}", real(*v))).collect();
            row.extend([
                real(rep.estimate),
                real(rep.se),
                rep.se_method.label().to_string(),
                real(rep.ci95.0),
                real(rep.ci95.1),
                match rep.ci_kind {
                    CiKind::Normal => "normal",
                    CiKind::Percentile => "percentile",
                }
                .to_string(),
                diagnostics.join(";"),
                rep.warnings.join("; "),
                String::new(),
            ]);
        }
        Err(e) => {
            row.extend(std::iter::repeat_n(String::new(), 8));
            row.push(e.to_string());
        }
    }
    row
}

pub(crate) fn estimate(args: &EstimateArgs) -> Result<String, CliError> {
    let mut opts = options(&args.common)?;
    opts.methods = args.methods.clone();
    opts.bootstrap = (args.bootstrap > 0).then(|| BootstrapPlan::new(args.bootstrap, args.seed));
    let data = load(&args.common)?;
    let mut out = sink(&args.common)?;
    let mut w = CsvOut::new(&mut out);
    let io = |e| CliError::Io {
        path: "results".into(),
        message: format!("{e}"),
    };
    w.row(&RESULT_COLUMNS).map_err(io)?;
    let (mut rows, mut errors) = (0, 0);
    for b in &args.common.battery {
        let kind = b.kind();
        for r in run_battery(&data, kind, &opts) {
            rows += 1;
            errors += usize::from(r.outcome.is_err());
            w.row(&result_row(kind.label(), &r)).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    Ok(format!("rows={rows} errors={errors} B={} seed={}", args.bootstrap, args.seed))
}

fn balance_rows(battery: &str, section: &str, t: &BalanceTable, w: &mut CsvOut) -> std::io::Result<()> {
    for r in &t.rows {
        for (metric, v) in [
            ("smd_before", r.smd_before),
            ("smd_after", r.smd_after),
            ("variance_ratio_before", r.variance_ratio_before),
            ("variance_ratio_after", r.variance_ratio_after),
        ] {
            w.row(&[battery, section, &r.covariate, metric, &real(v)])?;
        }
    }
    Ok(())
}

fn arm_rows(battery: &str, arm: &str, s: &ArmScores, w: &mut CsvOut) -> std::io::Result<()> {
    let names = ["min", "q05", "q25", "q50", "q75", "q95", "max"];
    let values = [s.min, s.quantiles[0], s.quantiles[1], s.quantiles[2], s.quantiles[3], s.quantiles[4], s.max];
    for (m, v) in names.iter().zip(values) {
        w.row(&[battery, "overlap", arm, m, &real(v)])?;
    }
    Ok(())
}

/// Long format `battery,section,item,metric,value`; sections are the three
/// balancing schemes plus `overlap`.
pub(crate) fn balance(args: &BalanceArgs) -> Result<String, CliError> {
    let opts = options(&args.common)?;
    let data = load(&args.common)?;
    let mut out = sink(&args.common)?;
    let mut w = CsvOut::new(&mut out);
    let io = |e| CliError::Io {
        path: "balance".into(),
        message: format!("{e}"),
    };
    w.row(&["battery", "section", "item", "metric", "value"]).map_err(io)?;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    for b in &args.common.battery {
        let kind = b.kind();
        if kind == causal_workbench::battery::BatteryKind::Offer {
            continue;
        }
        let s = balance_summary(&data, kind, &opts)?;
        let label = kind.label();
        balance_rows(label, "weighting", &s.weighting, &mut w).map_err(io)?;
        balance_rows(label, "stratification", &s.stratification, &mut w).map_err(io)?;
        balance_rows(label, "matching", &s.matching, &mut w).map_err(io)?;
        arm_rows(label, "treated", &s.overlap.treated, &mut w).map_err(io)?;
        arm_rows(label, "untreated", &s.overlap.untreated, &mut w).map_err(io)?;
        w.row(&[label, "overlap", "all", "fraction_outside", &real(s.overlap.fraction_outside)]).map_err(io)?;
        w.row(&[label, "overlap", "all", "overlap_coefficient", &real(s.overlap.overlap_coefficient)]).map_err(io)?;
        worst = worst.max(s.weighting.max_abs_smd_after());
        done += 1;
    }
    w.flush().map_err(io)?;
    Ok(format!("batteries={done} max_abs_smd_after_weighting={}", crate::significant(worst, 6)))
}
