//! Solves a small convex QP with the built-in interior-point method.
//!
//! `min (z0 - 1)^2 + (z1 - 2)^2` subject to `z0 + z1 <= 2`, `z >= 0`; the
//! optimum is the projection `(0.5, 1.5)` with multiplier 1.

use bilicut::solver::{solve, LinearRow, QuadraticModel, SymmetricSparse};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut model = QuadraticModel::new(2);
    // 1/2 z'Pz + c'z with P = 2I, c = (-2, -4); the constant restores the squares
    let mut p = SymmetricSparse::new();
    p.push(0, 0, 2.0);
    p.push(1, 1, 2.0);
    model.objective_quadratic = p;
    model.objective_linear = vec![-2.0, -4.0];
    model.objective_constant = 5.0;
    model.var_lo = vec![0.0, 0.0];
    model.add_row(LinearRow::le(vec![(0, 1.0), (1, 1.0)], 2.0));

    let res = solve(&model)?;
    println!("status     {:?}", res.status);
    println!("point      ({:.6}, {:.6})", res.point[0], res.point[1]);
    println!("objective  {:.6}", res.objective);
    println!("dual       {:.6}", res.duals[0]);
    println!("iterations {}", res.iterations);
    Ok(())
}
