//! Root bounds of both McCormick relaxations on one generated instance.
//!
//! `cargo run --release --example relaxation_bounds -- 100 80 1.0 1.0 7`

use std::time::Instant;

use bilicut::instances::{generate, GenParams};
use bilicut::relaxations::{build_bmc, build_smc};
use bilicut::solver::solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |k: usize, d: &str| args.get(k).cloned().unwrap_or_else(|| d.to_string());
    let params = GenParams {
        n: arg(0, "20").parse()?,
        m: arg(1, "8").parse()?,
        density_a: arg(2, "1.0").parse()?,
        rank_frac_q: arg(3, "0.5").parse()?,
        rank_frac_r: arg(3, "0.5").parse()?,
        seed: arg(4, "1").parse()?,
    };
    let inst = generate(&params)?;
    for (name, (model, _)) in [("B.Mc", build_bmc(&inst)?), ("S.Mc", build_smc(&inst)?)] {
        let t = Instant::now();
        let res = solve(&model)?;
        println!(
            "{name}: vars={} rows={} status={:?} lb={:.8} iters={} time={:.2}s",
            model.num_vars,
            model.rows.len(),
            res.status,
            res.objective,
            res.iterations,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
