//! Runs the estimator batteries on one calibrated dataset.
//!
//! `cargo run --release --example battery -- [seed] [replicates]`

use std::time::Instant;

use causal_workbench::battery::{run_battery, BatteryKind, BatteryOptions};
use causal_workbench::exec::Execution;
use causal_workbench::inference::BootstrapPlan;
use causal_workbench::simlearner::{generate, records_to_dataset, DgpConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(1, |s| s.parse().expect("seed"));
    let replicates = args.next().map_or(1000, |s| s.parse().expect("replicates"));
    let cfg = DgpConfig {
        seed,
        ..DgpConfig::calibrated()
    };
    let data = records_to_dataset(&generate(&cfg, Execution::Parallel).expect("generate"), false);
    let opts = BatteryOptions {
        bootstrap: (replicates > 0).then(|| BootstrapPlan::new(replicates, seed)),
        ..BatteryOptions::default()
    };
    for kind in [BatteryKind::Offer, BatteryKind::Uptake, BatteryKind::Initiation(false), BatteryKind::Initiation(true)] {
        let t = Instant::now();
        let rows = run_battery(&data, kind, &opts);
        println!("{} ({:.1?})", kind.label(), t.elapsed());
        for r in rows {
            match r.outcome {
                Ok(e) => println!("  {:<14} {:<46} {:9.2} ({:6.2}) {}", r.spec.to_string(), r.method, e.estimate, e.se, e.se_method.label()),
                Err(e) => println!("  {:<14} {:<46} error: {e}", r.spec.to_string(), r.method),
            }
        }
    }
}
