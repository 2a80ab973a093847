//! Gap closed by a single disjunctive cut from each of the three CGLP row
//! sets on dense instances.
//!
//! `cargo run --release --example single_cut_comparison -- 20 4`

use bilicut::cli::{run_suite, ExperimentConfig};
use bilicut::driver::Method;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(Ok(20), |s| s.parse())?;
    let m: usize = args.get(1).map_or(Ok(4), |s| s.parse())?;
    let mut config = ExperimentConfig {
        dims: vec![(n, m)],
        densities: vec![1.0],
        methods: vec![Method::BmcDisj, Method::BmcExtDisj, Method::BmcMixed],
        loop_max_n: None,
        ..ExperimentConfig::default()
    };
    config.loop_config.max_n_cuts = 1;
    let suite = run_suite(&config)?;
    println!("{:<14} {:>16}", "method", "mean gap closed");
    for method in &config.methods {
        let closed: Vec<f64> = suite.rows.iter().filter(|r| r.method == *method).filter_map(|r| r.gap_closed).collect();
        let mean = closed.iter().sum::<f64>() / closed.len().max(1) as f64;
        println!("{:<14} {:>15.3}%", method.name(), mean);
    }
    Ok(())
}
