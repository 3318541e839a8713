use std::io::Write;

use causal_workbench::battery::BatteryKind;
use causal_workbench::estimands::{Contrast, EstimandSpec, Exposure};
use causal_workbench::exec::Execution;
use causal_workbench::simlearner::{load_dataset, records_from_dataset, simulate_truth, stream_records, truth_table, Intervention, Subpopulation, TruthTable};
use sha2::{Digest, Sha256};

use crate::output::{create, real, CsvOut};
use crate::{sim_config, CliError, GenerateArgs, TruthArgs};

pub(crate) fn config_hash(toml: &str) -> String {
    let digest = Sha256::digest(toml.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn generate(args: &GenerateArgs) -> Result<String, CliError> {
    let cfg = sim_config(&args.sim, args.n, 17044)?;
    let toml = cfg.to_toml_string();
    if args.print_config {
        print!("{toml}");
        return Ok(String::new());
    }
    let path = args.out.as_ref().expect("clap requires --out");
    let mut out = create(path)?;
    stream_records(&cfg, Execution::Parallel, &mut out, args.potentials)?;
    out.flush().map_err(|e| CliError::io(path, e))?;
    Ok(format!("n={} seed={} config=sha256:{}", cfg.n, cfg.seed, config_hash(&toml)))
}

/// Every estimand the batteries report, in battery order.
pub(crate) fn battery_specs() -> Vec<EstimandSpec> {
    let mut specs = vec![BatteryKind::Offer.spec(Contrast::Ate)];
    for kind in [BatteryKind::Uptake, BatteryKind::Initiation(false), BatteryKind::Initiation(true)] {
        specs.push(kind.spec(Contrast::Ate));
        specs.push(kind.spec(Contrast::Att));
    }
    specs.insert(3, EstimandSpec::new(Contrast::Atnt, Exposure::A2));
    specs
}

pub(crate) fn truth(args: &TruthArgs) -> Result<String, CliError> {
    let (table, summary) = match &args.data {
        Some(path) => {
            let records = records_from_dataset(&load_dataset(path)?)?;
            let t = truth_table(&records)?;
            (t, format!("n={} source={}", records.len(), path.display()))
        }
        None => {
            let cfg = sim_config(&args.sim, args.n, 5_000_000)?;
            let t = simulate_truth(&cfg, Execution::Parallel)?;
            let hash = config_hash(&cfg.to_toml_string());
            (t, format!("n={} seed={} config=sha256:{hash}", cfg.n, cfg.seed))
        }
    };
    match &args.out {
        Some(path) => {
            let mut out = create(path)?;
            write_truth(&table, &mut out).map_err(|e| CliError::io(path, e))?;
            Ok(summary)
        }
        None => {
            write_truth(&table, &mut std::io::stdout().lock()).map_err(|e| CliError::io(std::path::Path::new("stdout"), e))?;
            Ok(summary)
        }
    }
}

/// Long format: `kind,name,subpopulation,value,count`. `mean` rows hold the
/// table cells, `contrast` rows the headline differences and `estimand`
/// rows the value of each battery target, keyed by its label.
fn write_truth(t: &TruthTable, out: &mut dyn Write) -> std::io::Result<()> {
    let mut w = CsvOut::new(out);
    w.row(&["kind", "name", "subpopulation", "value", "count"])?;
    for row in Intervention::ALL {
        for col in Subpopulation::ALL {
            w.row(&["mean", row.column(), col.label(), &real(t.get(row, col)), &t.count(col).to_string()])?;
        }
    }
    for c in t.contrasts() {
        w.row(&["contrast", c.name, "", &real(c.value), ""])?;
    }
    for spec in battery_specs() {
        if let Some(v) = t.for_spec(&spec) {
            w.row(&["estimand", &spec.to_string(), "", &real(v), ""])?;
        }
    }
    w.flush()
}
