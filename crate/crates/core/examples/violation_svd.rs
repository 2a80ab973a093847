//! Solves B.Mc on one instance and lists the singular pairs of `W - xy'`
//! that drive the disjunctive cuts.
//!
//! `cargo run --release --example violation_svd -- 20 8 3`

use bilicut::cuts::violation_svd;
use bilicut::instances::{generate, GenParams};
use bilicut::relaxations::{build_bmc, LiftedPoint};
use bilicut::solver::solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |k: usize, d: &str| args.get(k).cloned().unwrap_or_else(|| d.to_string());
    let params = GenParams {
        n: arg(0, "20").parse()?,
        m: arg(1, "8").parse()?,
        density_a: 1.0,
        rank_frac_q: 0.5,
        rank_frac_r: 0.5,
        seed: arg(2, "3").parse()?,
    };
    let inst = generate(&params)?;
    let (model, map) = build_bmc(&inst)?;
    let res = solve(&model)?;
    let p = LiftedPoint::from_vector(&map, &res.point);
    let pairs = violation_svd(&p.w, &p.x, &p.y)?;
    println!("lb(B.Mc) = {:.8}, sigma+ = {}", res.objective, pairs.len());
    for (k, pair) in pairs.iter().enumerate() {
        let ux: f64 = pair.u.iter().zip(&p.x).map(|(a, b)| a * b).sum();
        let vy: f64 = pair.v.iter().zip(&p.y).map(|(a, b)| a * b).sum();
        // u'Wv - (u'x)(v'y) equals sigma for a singular pair of W - xy'
        let uwv = p.w.bilinear(&pair.u, &pair.v);
        println!("  {k:2}: sigma = {:.6e}  u'Wv - (u'x)(v'y) = {:.6e}", pair.sigma, uwv - ux * vy);
    }
    Ok(())
}
