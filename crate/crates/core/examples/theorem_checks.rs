//! Property suites for the two comparison results: the symmetric inequality
//! implies the bilinear one under `X >= xx'`, `Y >= yy'`, and the summed
//! McCormick rows against the secant inequality.
//!
//! `cargo run --release --example theorem_checks -- 1000 100`

use bilicut::cli::verify_theorems;
use bilicut::cuts::{addmc_rhs, compare_addmc_saxmf, midpoint_gap, saxmf_rhs};
use bilicut::cuts::theory::box_grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let samples: usize = args.first().map_or(Ok(1000), |s| s.parse())?;
    let draws: usize = args.get(1).map_or(Ok(100), |s| s.parse())?;

    // one worked case: p1 in [0, 1], p2 in [0, 3]
    let (a1, b1, a2, b2) = (0.0, 1.0, 0.0, 3.0);
    println!("at the box centre: addmc = {}, saxmf = {}", addmc_rhs(a1, b1, a2, b2, 0.5, 1.5), saxmf_rhs(a1, b1, a2, b2, 0.5, 1.5));
    println!("midpoint gap {} = ((a1 - b1) - (a2 - b2))^2 / 16 = {}", midpoint_gap(a1, b1, a2, b2), 4.0 / 16.0);
    println!("classification on a 41x41 grid: {:?}", compare_addmc_saxmf(a1, b1, a2, b2, &box_grid(a1, b1, a2, b2, 41)));

    let report = verify_theorems(1, samples, draws);
    println!("{report:#?}");
    println!("{}", if report.passed() { "all properties hold" } else { "PROPERTY VIOLATED" });
    Ok(())
}
