//! The alternating-minimization upper bound and the gap metrics for both
//! root relaxations.
//!
//! `cargo run --release --example upper_bound_gaps -- 20 16 9`

use bilicut::driver::{relative_gap, upper_bound};
use bilicut::instances::{generate, GenParams};
use bilicut::relaxations::{build_bmc, build_smc, true_objective};
use bilicut::solver::solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |k: usize, d: &str| args.get(k).cloned().unwrap_or_else(|| d.to_string());
    let params = GenParams {
        n: arg(0, "20").parse()?,
        m: arg(1, "16").parse()?,
        density_a: 0.5,
        rank_frac_q: 0.25,
        rank_frac_r: 0.25,
        seed: arg(2, "9").parse()?,
    };
    let inst = generate(&params)?;
    for starts in [1, 8, 32] {
        let ub = upper_bound(&inst, starts, params.seed);
        assert_eq!(ub.z_bar, true_objective(&inst, &ub.x, &ub.y));
        println!("{starts:>2} starts: z_bar = {:.8}", ub.z_bar);
    }
    let ub = upper_bound(&inst, 32, params.seed);
    for (name, (model, _)) in [("S.Mc", build_smc(&inst)?), ("B.Mc", build_bmc(&inst)?)] {
        let lb = solve(&model)?.objective;
        let gap = relative_gap(ub.z_bar, lb);
        println!("{name}: lb = {lb:.8}, relative gap = {:.3}%{}", gap.percent, if gap.degenerate { " (degenerate)" } else { "" });
    }
    Ok(())
}
