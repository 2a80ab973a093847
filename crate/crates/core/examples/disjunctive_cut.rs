//! One round of separation by hand: solve B.Mc, build both 4-way
//! disjunctions for the leading singular pair, solve the CGLPs and check the
//! cuts on sampled feasible points.
//!
//! `cargo run --release --example disjunctive_cut -- 6 4 11`

use bilicut::cuts::{
    disjunction_mccormick, disjunction_saxena, product_form, separable_form, solve_cglp, violation_svd, CglpSettings,
};
use bilicut::instances::{generate, GenParams};
use bilicut::relaxations::{box_rows, build_bmc, lifted_bounds, LiftedPoint};
use bilicut::rng::Xoshiro256;
use bilicut::solver::solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |k: usize, d: &str| args.get(k).cloned().unwrap_or_else(|| d.to_string());
    let params = GenParams {
        n: arg(0, "6").parse()?,
        m: arg(1, "4").parse()?,
        density_a: 1.0,
        rank_frac_q: 0.5,
        rank_frac_r: 0.5,
        seed: arg(2, "11").parse()?,
    };
    let inst = generate(&params)?;
    let (model, map) = build_bmc(&inst)?;
    let res = solve(&model)?;
    let z_hat = res.point;
    let p = LiftedPoint::from_vector(&map, &z_hat);
    let pairs = violation_svd(&p.w, &p.x, &p.y)?;
    let Some(pair) = pairs.first() else {
        println!("B.Mc solution is already exact, nothing to separate");
        return Ok(());
    };
    println!("lb(B.Mc) = {:.8}, leading sigma = {:.4e}", res.objective, pair.sigma);

    let mut base = model.rows.clone();
    base.extend(box_rows(&inst, &map));
    let (lo, hi) = lifted_bounds(&inst, &map);
    let disjunctions = [
        ("secant (Disj)", disjunction_saxena(&separable_form(&pair.u, &pair.v, &inst)?, &z_hat)?),
        ("McCormick (ExtDisj)", disjunction_mccormick(&product_form(&pair.u, &pair.v, &inst)?, &z_hat)?),
    ];
    let mut rng = Xoshiro256::seed_from_u64(0);
    for (name, d) in &disjunctions {
        match solve_cglp(&base, d, &z_hat, &lo, &hi, &CglpSettings::default())? {
            None => println!("{name}: no violated cut"),
            Some(cut) => {
                let mut worst = f64::NEG_INFINITY;
                for _ in 0..2000 {
                    let x: Vec<f64> = (0..inst.n()).map(|i| rng.uniform(inst.ax[i], inst.bx[i])).collect();
                    let y: Vec<f64> = (0..inst.m()).map(|j| rng.uniform(inst.ay[j], inst.by[j])).collect();
                    worst = worst.max(cut.row.activity(&map.lift(&x, &y)) - cut.row.rhs);
                }
                println!(
                    "{name}: violation at z_hat {:.4e}, {} nonzeros, largest a'z - b on 2000 feasible points {:.3e}",
                    cut.violation,
                    cut.row.coeffs.len(),
                    worst
                );
            }
        }
    }
    Ok(())
}
