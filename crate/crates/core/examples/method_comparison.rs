//! A reduced comparison run through the harness: the results table, the
//! grouped means and the plot data, written under a target directory.
//!
//! `cargo run --release --example method_comparison -- target/comparison`

use std::path::PathBuf;

use bilicut::cli::{emit_plot_data, run_suite, ExperimentConfig};
use bilicut::driver::Method;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "target/comparison".into()).into();
    let config = ExperimentConfig {
        dims: vec![(10, 4), (10, 8)],
        densities: vec![0.5, 1.0],
        rank_fractions: vec![0.5, 1.0],
        methods: vec![Method::Smc, Method::Bmc, Method::BmcDisj, Method::BmcExtDisj],
        ..ExperimentConfig::default()
    };
    let suite = run_suite(&config)?;
    suite.write_to(&out)?;
    for file in emit_plot_data(&suite.csv(), true)? {
        std::fs::write(out.join(&file.name), &file.contents)?;
    }
    print!("{}", suite.aggregates_csv().lines().filter(|l| l.starts_with("grouping") || l.starts_with("size")).collect::<Vec<_>>().join("\n"));
    println!("\nwritten to {}", out.display());
    Ok(())
}
