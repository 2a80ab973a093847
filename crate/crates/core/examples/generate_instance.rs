//! Generates one seeded instance and prints it as JSON.
//!
//! `cargo run --example generate_instance -- 20 8 0.5 0.25 0.75 42 > inst.json`

use bilicut::instances::{generate, GenParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |k: usize, d: &str| args.get(k).cloned().unwrap_or_else(|| d.to_string());
    let params = GenParams {
        n: arg(0, "20").parse()?,
        m: arg(1, "8").parse()?,
        density_a: arg(2, "0.5").parse()?,
        rank_frac_q: arg(3, "0.5").parse()?,
        rank_frac_r: arg(4, "0.5").parse()?,
        seed: arg(5, "1").parse()?,
    };
    let inst = generate(&params)?;
    let v = inst.validate()?;
    eprintln!("n={} m={} nnz(A)={} min eig Q={:.3e} R={:.3e}", inst.n(), inst.m(), inst.a.count_nonzeros(), v.min_eig_q, v.min_eig_r);
    println!("{}", inst.to_json_pretty());
    Ok(())
}
