//! Prints the truth table of the calibrated generator.
//!
//! `cargo run --release --example truth_table -- [n] [seed]`

use std::time::Instant;

use causal_workbench::exec::Execution;
use causal_workbench::simlearner::{simulate_truth, DgpConfig, Intervention, Subpopulation};

fn main() {
    let mut args = std::env::args().skip(1);
    let n = args.next().map_or(5_000_000, |s| s.parse().expect("n"));
    let seed = args.next().map_or(1, |s| s.parse().expect("seed"));
    let cfg = DgpConfig {
        n,
        seed,
        ..DgpConfig::calibrated()
    };
    let t = Instant::now();
    let table = simulate_truth(&cfg, Execution::Sequential).expect("truth");
    println!("n = {n}, seed = {seed}, {:.1?}", t.elapsed());
    for row in Intervention::ALL {
        let cells: Vec<String> = Subpopulation::ALL.iter().map(|&c| format!("{:7.1}", table.get(row, c))).collect();
        println!("{:>36} {}", row.describe(), cells.join(" "));
    }
    for c in table.contrasts() {
        println!("{c:?}");
    }
}
