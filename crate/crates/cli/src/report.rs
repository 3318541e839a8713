use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::estimate::RESULT_COLUMNS;
use crate::output::{create, read_table};
use crate::{significant, CliError, ReportArgs};

const MISSING: &str = "—";
/// Deviation from truth, in standard errors, that gets flagged.
pub const FLAG_SE: f64 = 3.0;

fn num(text: &str) -> Option<f64> {
    text.parse().ok()
}

/// Text safe inside a markdown table cell.
fn esc(text: &str) -> String {
    text.replace('|', "\\|")
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| significant(v, 6))
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Invalid(format!("{}: missing column `{name}`", path.display())))
}

struct Truth {
    means: Vec<(String, String, f64)>,
    contrasts: Vec<(String, f64)>,
    estimands: BTreeMap<String, f64>,
}

fn load_truth(path: &Path) -> Result<Truth, CliError> {
    let (header, rows) = read_table(path)?;
    let (k, n, s, v) = (
        column(&header, "kind", path)?,
        column(&header, "name", path)?,
        column(&header, "subpopulation", path)?,
        column(&header, "value", path)?,
    );
    let mut t = Truth {
        means: vec![],
        contrasts: vec![],
        estimands: BTreeMap::new(),
    };
    for r in &rows {
        let Some(value) = num(&r[v]) else { continue };
        match r[k].as_str() {
            "mean" => t.means.push((r[n].clone(), r[s].clone(), value)),
            "contrast" => t.contrasts.push((r[n].clone(), value)),
            "estimand" => {
                t.estimands.insert(r[n].clone(), value);
            }
            _ => {}
        }
    }
    Ok(t)
}

/// Order-preserving unique values.
fn unique<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

fn render_truth(t: &Truth, md: &mut String) {
    let rows = unique(t.means.iter().map(|m| m.0.as_str()));
    let cols = unique(t.means.iter().map(|m| m.1.as_str()));
    let lookup: BTreeMap<(&str, &str), f64> = t.means.iter().map(|(r, c, v)| ((r.as_str(), c.as_str()), *v)).collect();
    let _ = writeln!(md, "## True average potential outcomes (g)\n");
    let _ = writeln!(md, "| potential outcome | {} |", cols.join(" | "));
    let _ = writeln!(md, "|---|{}", "---:|".repeat(cols.len()));
    for r in &rows {
        let cells: Vec<String> = cols.iter().map(|c| cell(lookup.get(&(*r, *c)).copied())).collect();
        let _ = writeln!(md, "| {r} | {} |", cells.join(" | "));
    }
    let _ = writeln!(md, "\n| contrast | value |\n|---|---:|");
    for (name, v) in &t.contrasts {
        let _ = writeln!(md, "| {} | {} |", esc(name), significant(*v, 6));
    }
    md.push('\n');
}

fn render_balance(path: &Path, md: &mut String) -> Result<(), CliError> {
    let (header, rows) = read_table(path)?;
    let (b, s, i, m, v) = (
        column(&header, "battery", path)?,
        column(&header, "section", path)?,
        column(&header, "item", path)?,
        column(&header, "metric", path)?,
        column(&header, "value", path)?,
    );
    let value = |bat: &str, sec: &str, item: &str, metric: &str| {
        rows.iter()
            .find(|r| r[b] == bat && r[s] == sec && r[i] == item && r[m] == metric)
            .and_then(|r| num(&r[v]))
    };
    let _ = writeln!(md, "## Covariate balance and overlap\n");
    for bat in unique(rows.iter().map(|r| r[b].as_str())) {
        let covariates = unique(rows.iter().filter(|r| r[b] == bat && r[s] == "weighting").map(|r| r[i].as_str()));
        let _ = writeln!(md, "### {bat}\n");
        let _ = writeln!(
            md,
            "| covariate | SMD before | SMD weighted | SMD stratified | SMD matched | VR before | VR weighted |\n|---|---:|---:|---:|---:|---:|---:|"
        );
        for c in covariates {
            let _ = writeln!(
                md,
                "| {c} | {} | {} | {} | {} | {} | {} |",
                cell(value(bat, "weighting", c, "smd_before")),
                cell(value(bat, "weighting", c, "smd_after")),
                cell(value(bat, "stratification", c, "smd_after")),
                cell(value(bat, "matching", c, "smd_after")),
                cell(value(bat, "weighting", c, "variance_ratio_before")),
                cell(value(bat, "weighting", c, "variance_ratio_after")),
            );
        }
        let stats = ["min", "q05", "q25", "q50", "q75", "q95", "max"];
        let _ = writeln!(md, "\n| score | {} |\n|---|{}", stats.join(" | "), "---:|".repeat(stats.len()));
        for arm in ["treated", "untreated"] {
            let cells: Vec<String> = stats.iter().map(|st| cell(value(bat, "overlap", arm, st))).collect();
            let _ = writeln!(md, "| {arm} | {} |", cells.join(" | "));
        }
        let _ = writeln!(
            md,
            "\nOutside common support: {}; overlap coefficient: {}\n",
            cell(value(bat, "overlap", "all", "fraction_outside")),
            cell(value(bat, "overlap", "all", "overlap_coefficient")),
        );
    }
    Ok(())
}

pub(crate) fn report(args: &ReportArgs) -> Result<String, CliError> {
    let path = &args.results;
    let (header, rows) = read_table(path)?;
    if rows.is_empty() {
        return Err(CliError::EmptyInput(path.display().to_string()));
    }
    let col: Vec<usize> = RESULT_COLUMNS
        .iter()
        .map(|c| column(&header, c, path))
        .collect::<Result<_, _>>()?;
    let get = |r: &Vec<String>, name: &str| r[col[RESULT_COLUMNS.iter().position(|c| *c == name).expect("known")]].clone();
    let truth = args.truth.as_deref().map(load_truth).transpose()?;

    let mut md = String::from("# Estimation report\n\n## Estimates (g)\n\n");
    let (mut errors, mut flagged) = (0, 0);
    for bat in unique(rows.iter().map(|r| r[col[0]].as_str())) {
        let _ = writeln!(md, "### {bat}\n");
        let _ = writeln!(
            md,
            "| estimand | method | estimate | SE | SE method | 95% CI | truth | flag |\n|---|---|---:|---:|---|---|---:|---|"
        );
        for r in rows.iter().filter(|r| r[col[0]] == bat) {
            let estimand = get(r, "estimand");
            let t = truth.as_ref().and_then(|t| t.estimands.get(&estimand).copied());
            let err = get(r, "error");
            if !err.is_empty() {
                errors += 1;
                let _ = writeln!(md, "| {} | {} | error: {} | | | | {} | |", esc(&estimand), esc(&get(r, "method")), esc(&err), cell(t));
                continue;
            }
            let (est, se) = (num(&get(r, "estimate")), num(&get(r, "se")));
            let flag = match (est, se, t) {
                (Some(e), Some(s), Some(t)) if s.is_finite() && (e - t).abs() > FLAG_SE * s => {
                    flagged += 1;
                    format!("> {FLAG_SE} SE")
                }
                _ => String::new(),
            };
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | [{}, {}] | {} | {flag} |",
                esc(&estimand),
                esc(&get(r, "method")),
                cell(est),
                cell(se),
                get(r, "se_method"),
                cell(num(&get(r, "ci_low"))),
                cell(num(&get(r, "ci_high"))),
                cell(t),
            );
        }
        md.push('\n');
    }
    if let Some(t) = &truth {
        render_truth(t, &mut md);
    }
    if let Some(b) = &args.balance {
        render_balance(b, &mut md)?;
    }
    let summary = format!(
        "estimates={} errors={errors} flagged_beyond_{FLAG_SE}_se={flagged}{}",
        rows.len(),
        if truth.is_none() { " truth=absent" } else { "" }
    );
    let _ = writeln!(md, "{summary}");
    match &args.out {
        Some(p) => {
            let mut f = create(p)?;
            f.write_all(md.as_bytes()).and_then(|()| f.flush()).map_err(|e| CliError::io(p, e))?;
        }
        None => print!("{md}"),
    }
    Ok(summary)
}
