//! Acceptance criteria 1 to 9, one PASS/FAIL line each.
//!
//! Runs the default 64-instance suite twice (the second run is the
//! determinism check), so expect a long run in release mode.

use std::time::Instant;

use bilicut::cli::{run_suite, ExperimentConfig, InstanceRecord, SuiteOutput};
use bilicut::cuts::theory::{box_grid, diagonal_grid};
use bilicut::cuts::{addmc_rhs, midpoint_gap, product_form, saxmf_rhs, verify_theorem1};
use bilicut::driver::{run_method, Method, MethodOutcome};
use bilicut::instances::BilinearInstance;
use bilicut::linalg::DenseMatrix;
use bilicut::relaxations::{build_bmc, VariableMap};
use bilicut::rng::Xoshiro256;
use bilicut::solver::{solve, LinearRow, QuadraticModel, Sense, SolveStatus};

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: usize, name: &'static str, pass: bool, detail: String) -> Verdict {
    let v = Verdict { id, name, pass, detail };
    println!("{} criterion {} ({}): {}", if v.pass { "PASS" } else { "FAIL" }, v.id, v.name, v.detail);
    v
}

fn lb_of(rec: &InstanceRecord, method: Method) -> Option<f64> {
    rec.outcome(method).filter(|o| o.error.is_none()).map(|o| o.lb).filter(|v| v.is_finite())
}

fn loop_outcomes(rec: &InstanceRecord) -> impl Iterator<Item = &MethodOutcome> {
    rec.outcomes.iter().filter(|o| o.trace.is_some())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn unit(rng: &mut Xoshiro256, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
    let s = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / s).collect()
}

fn random_box(rng: &mut Xoshiro256, k: usize) -> (Vec<f64>, Vec<f64>) {
    let lo: Vec<f64> = (0..k).map(|_| rng.uniform(-2.0, 1.0)).collect();
    let hi = lo.iter().map(|a| a + rng.uniform(0.1, 2.0)).collect();
    (lo, hi)
}

fn bilinear_only(a: DenseMatrix, bx: (Vec<f64>, Vec<f64>), by: (Vec<f64>, Vec<f64>)) -> BilinearInstance {
    let (n, m) = (a.rows(), a.cols());
    let mut inst = BilinearInstance::with_unit_boxes(a, DenseMatrix::zeros(n, n), DenseMatrix::zeros(m, m));
    (inst.ax, inst.bx, inst.ay, inst.by) = (bx.0, bx.1, by.0, by.1);
    inst
}

fn criterion1(suite: &SuiteOutput) -> Verdict {
    let mut dominated = 0;
    let mut worst = f64::INFINITY;
    let (mut strict, mut eligible) = (0, 0);
    let mut missing = 0;
    let mut seconds = 0.0;
    for rec in &suite.records {
        for o in &rec.outcomes {
            if matches!(o.method, Method::Smc | Method::Bmc) {
                seconds += o.seconds;
            }
        }
        let (Some(s), Some(b)) = (lb_of(rec, Method::Smc), lb_of(rec, Method::Bmc)) else {
            missing += 1;
            continue;
        };
        worst = worst.min(b - s);
        dominated += usize::from(b >= s - 1e-6);
        let p = &rec.spec.params;
        if p.rank_frac_q >= 0.5 && p.rank_frac_r >= 0.5 {
            eligible += 1;
            strict += usize::from(b - s > 1e-4 * s.abs().max(1.0));
        }
    }
    let n = suite.records.len();
    let share = strict as f64 / eligible.max(1) as f64;
    verdict(
        1,
        "relaxation dominance",
        n == 64 && missing == 0 && dominated == n && eligible > 0 && share >= 0.9 && seconds <= 600.0,
        format!(
            "{dominated}/{n} with lb(B.Mc) >= lb(S.Mc) - 1e-6 (min difference {worst:.3e}); strict on {strict}/{eligible} rank>=0.5 instances ({:.0}%); relaxation time {seconds:.1}s",
            100.0 * share
        ),
    )
}

fn criterion2() -> Verdict {
    // the n = 20, density 1.0 slice of the default grid with Q = R = 0
    let config = ExperimentConfig { zero_quadratics: true, ..ExperimentConfig::default() };
    let specs: Vec<_> = config.instances().into_iter().filter(|s| s.params.n == 20 && s.params.density_a == 1.0).collect();
    let mut worst = 0.0_f64;
    let mut ok = 0;
    for spec in &specs {
        let inst = config.build_instance(spec).expect("instance regenerates");
        let lb = |m: Method| Some(run_method(&inst, m, &config.loop_config)).filter(|o| o.error.is_none()).map(|o| o.lb);
        if let (Some(s), Some(b)) = (lb(Method::Smc), lb(Method::Bmc)) {
            let scaled = (b - s).abs() / b.abs().max(1.0);
            worst = worst.max(scaled);
            ok += usize::from(scaled <= 1e-6);
        }
    }
    let n = specs.len();
    verdict(2, "Q=R=0 equivalence", n == 16 && ok == n, format!("{ok}/{n} agree; max |diff|/max(1,|lb|) = {worst:.3e}"))
}

fn criterion3(suite: &SuiteOutput) -> Verdict {
    let (mut cuts, mut checks, mut violations) = (0usize, 0usize, 0usize);
    let mut worst = f64::NEG_INFINITY;
    for rec in &suite.records {
        let rows: Vec<LinearRow> = loop_outcomes(rec).flat_map(|o| o.trace.as_ref().unwrap().cuts.iter().map(|c| c.row())).collect();
        if rows.is_empty() {
            continue;
        }
        cuts += rows.len();
        let inst = suite.config.build_instance(&rec.spec).expect("instance regenerates");
        let map = VariableMap::bilinear(inst.n(), inst.m());
        let mut rng = Xoshiro256::seed_from_u64(rec.spec.params.seed ^ 0x5eed);
        let mut points = vec![map.lift(&rec.x_star, &rec.y_star)];
        for _ in 0..2000 {
            let x: Vec<f64> = (0..inst.n()).map(|i| rng.uniform(inst.ax[i], inst.bx[i])).collect();
            let y: Vec<f64> = (0..inst.m()).map(|j| rng.uniform(inst.ay[j], inst.by[j])).collect();
            points.push(map.lift(&x, &y));
        }
        for z in &points {
            for r in &rows {
                let excess = r.activity(z) - r.rhs;
                worst = worst.max(excess);
                violations += usize::from(excess > 1e-7);
                checks += 1;
            }
        }
    }
    verdict(
        3,
        "cut soundness",
        cuts > 0 && violations == 0,
        format!("{cuts} cuts, {checks} point checks, {violations} violations (max a'z - b = {worst:.3e})"),
    )
}

fn criterion4(suite: &SuiteOutput) -> Verdict {
    let (mut runs, mut weak, mut non_monotone, mut over_limit, mut over_round) = (0, 0, 0, 0, 0);
    let mut min_violation = f64::INFINITY;
    for rec in &suite.records {
        for o in loop_outcomes(rec) {
            let t = o.trace.as_ref().unwrap();
            runs += 1;
            for c in &t.cuts {
                min_violation = min_violation.min(c.violation);
                weak += usize::from(c.violation < 1e-6);
            }
            non_monotone += usize::from(!t.is_monotone(1e-7));
            over_limit += usize::from(t.total_cuts() > 40);
            over_round += t.records.iter().filter(|r| r.cuts_added > r.sigma_plus.min(4)).count();
        }
    }
    verdict(
        4,
        "cut effectiveness",
        runs > 0 && weak == 0 && non_monotone == 0 && over_limit == 0 && over_round == 0,
        format!(
            "{runs} loops; min CGLP violation {min_violation:.3e}; {weak} weak cuts, {non_monotone} non-monotone traces, {over_limit} over 40 cuts, {over_round} rounds over min(4, sigma+)"
        ),
    )
}

fn criterion5(suite: &SuiteOutput) -> Verdict {
    let closed = |method: Method| -> Vec<f64> {
        suite.rows.iter().filter(|r| r.method == method && r.n == 20 && r.density == 1.0).filter_map(|r| r.gap_closed).collect()
    };
    let (d, e) = (closed(Method::BmcDisj), closed(Method::BmcExtDisj));
    let range = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let (rd, re) = (range(&d), range(&e));
    let overlap = rd.0 <= re.1 && re.0 <= rd.1;
    let (md, me) = (median(d.clone()), median(e.clone()));
    verdict(
        5,
        "both cut variants tighten",
        d.len() == 16 && e.len() == 16 && md > 0.0 && me > 0.0 && overlap,
        format!(
            "median gap closed Disj {md:.3}% over [{:.3}, {:.3}], ExtDisj {me:.3}% over [{:.3}, {:.3}] ({} / {} instances)",
            rd.0,
            rd.1,
            re.0,
            re.1,
            d.len(),
            e.len()
        ),
    )
}

fn criterion6() -> Verdict {
    let mut rng = Xoshiro256::seed_from_u64(6);
    let (mut diag, mut excess, mut mid) = (0.0_f64, f64::NEG_INFINITY, 0.0_f64);
    for _ in 0..100 {
        // (i) n = m, v = u, same box: p1 and p2 share their bounds
        let k = 1 + rng.below(6) as usize;
        let u = unit(&mut rng, k);
        let b = random_box(&mut rng, k);
        let inst = bilinear_only(DenseMatrix::zeros(k, k), b.clone(), b);
        let f = product_form(&u, &u, &inst).expect("consistent dims");
        let ((a1, b1), (a2, b2)) = (f.p1_bounds, f.p2_bounds);
        for &(p1, p2) in &diagonal_grid(a1, b1, 101) {
            diag = diag.max((addmc_rhs(a1, b1, a2, b2, p1, p2) - saxmf_rhs(a1, b1, a2, b2, p1, p2)).abs());
        }

        // (ii) general (u, v, box) with v rescaled to equalize the widths
        let (n, m) = (1 + rng.below(6) as usize, 1 + rng.below(6) as usize);
        let u = unit(&mut rng, n);
        let v = unit(&mut rng, m);
        let inst = bilinear_only(DenseMatrix::zeros(n, m), random_box(&mut rng, n), random_box(&mut rng, m));
        let f = product_form(&u, &v, &inst).expect("consistent dims");
        let scale = (f.p1_bounds.1 - f.p1_bounds.0) / (f.p2_bounds.1 - f.p2_bounds.0);
        let v: Vec<f64> = v.iter().map(|a| a * scale).collect();
        let f = product_form(&u, &v, &inst).expect("consistent dims");
        let ((a1, b1), (a2, b2)) = (f.p1_bounds, f.p2_bounds);
        for &(p1, p2) in &box_grid(a1, b1, a2, b2, 101) {
            excess = excess.max(saxmf_rhs(a1, b1, a2, b2, p1, p2) - addmc_rhs(a1, b1, a2, b2, p1, p2));
        }

        // (iii) unequal widths: closed-form midpoint gap
        let u = unit(&mut rng, n);
        let v = unit(&mut rng, m);
        let f = product_form(&u, &v, &inst).expect("consistent dims");
        let ((a1, b1), (a2, b2)) = (f.p1_bounds, f.p2_bounds);
        let closed = ((a1 - b1) - (a2 - b2)).powi(2) / 16.0;
        mid = mid.max((midpoint_gap(a1, b1, a2, b2) - closed).abs());
    }
    verdict(
        6,
        "summed McCormick vs secant right sides",
        diag <= 1e-10 && excess <= 1e-10 && mid <= 1e-10,
        format!("(i) max |addmc - saxmf| {diag:.2e}; (ii) max saxmf - addmc {excess:.2e}; (iii) max midpoint error {mid:.2e}"),
    )
}

fn criterion7() -> Verdict {
    let mut rng = Xoshiro256::seed_from_u64(7);
    let (mut falsified, mut held, mut chain_max) = (0, 0, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let (n, m) = (1 + rng.below(5) as usize, 1 + rng.below(5) as usize);
        let x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let spread = rng.uniform(0.0, 0.6);
        let mut above = |v: &[f64]| {
            let k = v.len();
            let g = DenseMatrix::from_row_major(k, k, (0..k * k).map(|_| spread * rng.uniform(-1.0, 1.0)).collect());
            DenseMatrix::outer(v, v).add(&g.matmul(&g.transpose()).expect("square"))
        };
        let (big_x, big_y) = (above(&x), above(&y));
        let w = DenseMatrix::outer(&x, &y).add(&DenseMatrix::from_row_major(
            n,
            m,
            (0..n * m).map(|_| rng.uniform(-0.5, 0.5)).collect(),
        ));
        let u = unit(&mut rng, n);
        let v = unit(&mut rng, m);
        let r = verify_theorem1(&x, &y, &w, &big_x, &big_y, &u, &v).expect("precondition holds by construction");
        // symmetric inequality holding (<= 0) must force the bilinear one
        let implied = r.symmetric > 0.0 || r.bilinear <= 1e-12;
        falsified += usize::from(!implied);
        held += usize::from(r.symmetric <= 0.0);
        chain_max = chain_max.max(r.chain);
    }
    verdict(
        7,
        "symmetric inequality implies bilinear",
        falsified == 0 && chain_max <= 1e-10 && held > 0,
        format!("1000 samples, symmetric inequality held on {held}, implication falsified {falsified} times, max chain {chain_max:.3e}"),
    )
}

/// `min c'x` over `Ax <= b` by enumerating every vertex; `None` if infeasible.
fn vertex_oracle(c: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<f64> {
    let n = c.len();
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        // Gaussian elimination with partial pivoting on the chosen rows
        let mut a: Vec<Vec<f64>> = pick.iter().map(|&r| {
            let mut row = rows[r].0.clone();
            row.push(rows[r].1);
            row
        }).collect();
        let mut singular = false;
        for col in 0..n {
            let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            if a[p][col].abs() < 1e-10 {
                singular = true;
                break;
            }
            a.swap(col, p);
            for i in 0..n {
                if i != col {
                    let f = a[i][col] / a[col][col];
                    for j in col..=n {
                        a[i][j] -= f * a[col][j];
                    }
                }
            }
        }
        if !singular {
            let x: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
            let feasible = rows.iter().all(|(r, b)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9);
            if feasible {
                let f: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(f, |g: f64| g.min(f)));
            }
        }
        // next n-subset in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < rows.len() - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn criterion8() -> Verdict {
    let mut rng = Xoshiro256::seed_from_u64(8);
    let mut corner_err = 0.0_f64;
    for _ in 0..50 {
        let mut a = rng.uniform(-2.0, 2.0);
        if a == 0.0 {
            a = 1.0;
        }
        let inst = bilinear_only(DenseMatrix::from_diag(&[a]), random_box(&mut rng, 1), random_box(&mut rng, 1));
        let exact = [inst.ax[0], inst.bx[0]]
            .iter()
            .flat_map(|&x| [inst.ay[0], inst.by[0]].map(|y| a * x * y))
            .fold(f64::INFINITY, f64::min);
        let lb = solve(&build_bmc(&inst).expect("convex").0).expect("solves").objective;
        corner_err = corner_err.max((lb - exact).abs());
    }

    let (mut lp_err, mut lps, mut status_mismatch) = (0.0_f64, 0, 0);
    for _ in 0..200 {
        let n = 1 + rng.below(8) as usize;
        let m = rng.below(7) as usize;
        let c: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut rows: Vec<(Vec<f64>, f64)> = (0..m)
            .map(|_| ((0..n).map(|_| rng.uniform(-1.0, 1.0)).collect(), rng.uniform(-0.5, 1.0)))
            .collect();
        let (lo, hi) = random_box(&mut rng, n);
        let mut model = QuadraticModel::new(n);
        model.objective_linear = c.clone();
        model.var_lo = lo.clone();
        model.var_hi = hi.clone();
        for (r, b) in &rows {
            model.add_row(LinearRow::from_dense(r, Sense::Le, *b));
        }
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            rows.push((e.clone(), hi[k]));
            e[k] = -1.0;
            rows.push((e, -lo[k]));
        }
        let oracle = vertex_oracle(&c, &rows);
        let res = solve(&model).expect("well-formed model");
        match oracle {
            Some(f) => {
                lps += 1;
                if res.status == SolveStatus::Optimal {
                    lp_err = lp_err.max((res.objective - f).abs() / f.abs().max(1.0));
                } else {
                    status_mismatch += 1;
                }
            }
            None => status_mismatch += usize::from(res.status != SolveStatus::Infeasible),
        }
    }
    verdict(
        8,
        "oracle equivalence",
        corner_err <= 1e-7 && lp_err <= 1e-6 && status_mismatch == 0,
        format!(
            "50 single products: max |lb(B.Mc) - corner min| {corner_err:.2e}; {lps} feasible LPs (n <= 8): max relative error {lp_err:.2e}; {status_mismatch} status mismatches"
        ),
    )
}

fn main() {
    let start = Instant::now();
    let config = ExperimentConfig::default();
    let first = run_suite(&config).expect("default config is valid");
    eprintln!("default suite finished in {:.0}s", start.elapsed().as_secs_f64());

    let mut verdicts = vec![
        criterion1(&first),
        criterion2(),
        criterion3(&first),
        criterion4(&first),
        criterion5(&first),
        criterion6(),
        criterion7(),
        criterion8(),
    ];
    let second = run_suite(&config).expect("default config is valid");
    let (a, b) = (first.csv(), second.csv());
    verdicts.push(verdict(
        9,
        "determinism",
        a == b && !a.is_empty(),
        format!("{} rows, {} bytes, identical: {}", first.rows.len(), a.len(), a == b),
    ));

    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    eprintln!("acceptance finished in {:.0}s", start.elapsed().as_secs_f64());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
