//! Runs one cutting-plane loop from the B.Mc root and prints its trace.
//!
//! `cargo run --release --example cutting_plane_loop -- extdisj 20 4 5`

use bilicut::driver::{cutting_plane, gap_closed, upper_bound, LoopConfig, LoopVariant};
use bilicut::instances::{generate, GenParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |k: usize, d: &str| args.get(k).cloned().unwrap_or_else(|| d.to_string());
    let variant = match arg(0, "extdisj").to_ascii_lowercase().as_str() {
        "disj" => LoopVariant::Disj,
        "extdisj" => LoopVariant::ExtDisj,
        "mixed" => LoopVariant::Mixed,
        other => return Err(format!("unknown variant {other:?}; use disj, extdisj or mixed").into()),
    };
    let params = GenParams {
        n: arg(1, "20").parse()?,
        m: arg(2, "4").parse()?,
        density_a: 1.0,
        rank_frac_q: 0.5,
        rank_frac_r: 0.5,
        seed: arg(3, "5").parse()?,
    };
    let inst = generate(&params)?;
    let ub = upper_bound(&inst, 32, params.seed);
    let trace = cutting_plane(&inst, &LoopConfig::new(variant))?;
    println!("z_bar = {:.8}", ub.z_bar);
    println!("{:>4} {:>16} {:>7} {:>5} {:>6}  max violation", "iter", "lb", "sigma+", "cuts", "total");
    for r in &trace.records {
        let vmax = r.violations.iter().copied().fold(f64::NAN, f64::max);
        println!("{:>4} {:>16.8} {:>7} {:>5} {:>6}  {:.3e}", r.iteration, r.lb, r.sigma_plus, r.cuts_added, r.cumulative_cuts, vmax);
    }
    let closed = gap_closed(ub.z_bar, trace.root_lb, trace.final_lb).map_or("root gap is zero".into(), |g| format!("{g:.2}%"));
    println!("{:?} after {} cuts in {:.1}s; gap closed {closed}", trace.termination, trace.total_cuts(), trace.elapsed_seconds);
    Ok(())
}
