//! Cutting-plane loops on B.Mc, the alternating-minimization upper bound and
//! gap metrics.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuts::{
    disjunction_mccormick, disjunction_saxena, extended_mccormick_rows, product_form, secant_inequalities,
    separable_form, solve_cglp, tangent_linearize, unit_vector_rows, CglpSettings, Cut, CutError, CutFamily,
    Provenance, SingularPair,
};
use crate::cuts::violation_svd;
use crate::instances::BilinearInstance;
use crate::relaxations::{
    box_rows, build_bmc, build_smc, lifted_bounds, true_objective, LiftedPoint, RelaxationError, VariableMap,
};
use crate::rng::Xoshiro256;
use crate::solver::{solve, LinearRow, SolveStatus, SolverError};

/// Guard on `|z_bar|` in the relative gap.
pub const GAP_EPS: f64 = 1e-8;
/// Guard on `z_bar - lb_root` in the gap closed.
pub const GAP_CLOSED_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid loop configuration: {0}")]
    InvalidConfig(String),
    #[error("root gap is zero; nothing to close")]
    RootGapZero,
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LoopVariant {
    /// Secant disjunctions on the separable form, unit-vector tangents in the CGLP.
    Disj,
    /// McCormick disjunctions on the product form.
    ExtDisj,
    /// Both row sets in the CGLP, both disjunctions per pair.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub variant: LoopVariant,
    pub max_n_cuts: usize,
    /// Cuts per round are `min(max_cuts_per_round, sigma_plus, remaining)`.
    pub max_cuts_per_round: usize,
    pub violation_threshold: f64,
    /// Wall-clock seconds, checked between CGLPs.
    pub time_limit: Option<f64>,
}

impl LoopConfig {
    pub fn new(variant: LoopVariant) -> Self {
        Self { variant, max_n_cuts: 40, max_cuts_per_round: 4, violation_threshold: 1e-6, time_limit: None }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        if self.max_n_cuts == 0 || self.max_cuts_per_round == 0 {
            return Err(DriverError::InvalidConfig("cut limits must be at least 1".into()));
        }
        if !(self.violation_threshold > 0.0) {
            return Err(DriverError::InvalidConfig("violation threshold must be positive".into()));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(DriverError::InvalidConfig("time limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    CutLimit,
    NoViolatedCut,
    TimeLimit,
    SolverFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Relaxation value with all cuts accepted so far.
    pub lb: f64,
    pub sigma_plus: usize,
    pub cuts_added: usize,
    pub cumulative_cuts: usize,
    /// CGLP violations of the cuts accepted after this solve.
    pub violations: Vec<f64>,
    pub cglp_failures: usize,
}

/// An accepted cut in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub violation: f64,
    pub provenance: Provenance,
}

impl CutRecord {
    pub fn row(&self) -> LinearRow {
        LinearRow::le(self.coeffs.clone(), self.rhs)
    }
}

impl From<&Cut> for CutRecord {
    fn from(c: &Cut) -> Self {
        Self { coeffs: c.row.coeffs.clone(), rhs: c.row.rhs, violation: c.violation, provenance: c.provenance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTrace {
    pub variant: LoopVariant,
    pub root_lb: f64,
    pub records: Vec<IterationRecord>,
    pub final_lb: f64,
    pub termination: Termination,
    pub cuts: Vec<CutRecord>,
    /// Incumbent of the last relaxation solved, bilinear layout.
    pub incumbents: Vec<Vec<f64>>,
    pub failure: Option<String>,
    pub elapsed_seconds: f64,
}

impl BoundTrace {
    pub fn total_cuts(&self) -> usize {
        self.cuts.len()
    }

    /// Whether the lb sequence never drops by more than `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.records.windows(2).all(|w| w[1].lb >= w[0].lb - slack)
    }
}

/// Tangent rows with identical coefficients and right side removed.
fn dedup_rows(rows: Vec<LinearRow>) -> Vec<LinearRow> {
    let mut seen = HashSet::new();
    rows.into_iter()
        .filter(|r| {
            let key: (Vec<(usize, u64)>, u64, u8) =
                (r.coeffs.iter().map(|&(i, v)| (i, v.to_bits())).collect(), r.rhs.to_bits(), r.sense as u8);
            seen.insert(key)
        })
        .collect()
}

/// Variant-specific CGLP rows for the current incumbent and pairs.
fn variant_rows(
    inst: &BilinearInstance,
    variant: LoopVariant,
    z_hat: &[f64],
    pairs: &[SingularPair],
) -> Result<Vec<LinearRow>, CutError> {
    let mut rows = Vec::new();
    if matches!(variant, LoopVariant::Disj | LoopVariant::Mixed) {
        rows.extend(dedup_rows(unit_vector_rows(inst, z_hat)));
        for pair in pairs {
            let form = separable_form(&pair.u, &pair.v, inst)?;
            rows.extend(secant_inequalities(&form).iter().map(|q| tangent_linearize(q, z_hat)));
        }
    }
    if matches!(variant, LoopVariant::ExtDisj | LoopVariant::Mixed) {
        for pair in pairs {
            rows.extend(extended_mccormick_rows(&product_form(&pair.u, &pair.v, inst)?)?);
        }
    }
    Ok(rows)
}

/// Runs the cutting-plane loop from the B.Mc root.
///
/// Solver failures end the loop with [`Termination::SolverFailure`] and the
/// partial trace; only configuration and model-building problems are errors.
pub fn cutting_plane(inst: &BilinearInstance, config: &LoopConfig) -> Result<BoundTrace, DriverError> {
    config.validate()?;
    let start = Instant::now();
    let (mut model, map) = build_bmc(inst)?;
    let mut static_rows = model.rows.clone();
    static_rows.extend(box_rows(inst, &map));
    let (var_lo, var_hi) = lifted_bounds(inst, &map);
    let cglp_settings = CglpSettings { violation_threshold: config.violation_threshold, ..CglpSettings::default() };
    let out_of_time = || config.time_limit.is_some_and(|t| start.elapsed().as_secs_f64() >= t);

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut cuts: Vec<Cut> = Vec::new();
    let mut incumbents = Vec::new();
    let mut failure = None;
    let termination;
    let mut iteration = 0;
    loop {
        let res = match solve(&model) {
            Ok(r) if r.status == SolveStatus::Optimal => r,
            Ok(r) => {
                failure = Some(format!("relaxation status {:?}", r.status));
                termination = Termination::SolverFailure;
                break;
            }
            Err(e) => {
                failure = Some(e.to_string());
                termination = Termination::SolverFailure;
                break;
            }
        };
        let z_hat = res.point;
        let p = LiftedPoint::from_vector(&map, &z_hat);
        let pairs = violation_svd(&p.w, &p.x, &p.y)?;
        let mut record = IterationRecord {
            iteration,
            lb: res.objective,
            sigma_plus: pairs.len(),
            cuts_added: 0,
            cumulative_cuts: cuts.len(),
            violations: Vec::new(),
            cglp_failures: 0,
        };
        incumbents = vec![z_hat.clone()];

        let remaining = config.max_n_cuts - cuts.len();
        if pairs.is_empty() {
            records.push(record);
            termination = Termination::NoViolatedCut;
            break;
        }
        if remaining == 0 {
            records.push(record);
            termination = Termination::CutLimit;
            break;
        }
        if out_of_time() {
            records.push(record);
            termination = Termination::TimeLimit;
            break;
        }

        let n_cuts = config.max_cuts_per_round.min(pairs.len()).min(remaining);
        let current = &pairs[..n_cuts];
        let mut base = static_rows.clone();
        base.extend(cuts.iter().map(|c| c.row.clone()));
        base.extend(variant_rows(inst, config.variant, &z_hat, current)?);

        let mut new_cuts = Vec::new();
        let mut timed_out = false;
        for (k, pair) in current.iter().enumerate() {
            if out_of_time() {
                timed_out = true;
                break;
            }
            let mut best: Option<Cut> = None;
            let families: &[CutFamily] = match config.variant {
                LoopVariant::Disj => &[CutFamily::Saxena],
                LoopVariant::ExtDisj => &[CutFamily::McCormick],
                LoopVariant::Mixed => &[CutFamily::Saxena, CutFamily::McCormick],
            };
            for &family in families {
                let disjunction = match family {
                    CutFamily::Saxena => separable_form(&pair.u, &pair.v, inst)
                        .and_then(|f| disjunction_saxena(&f, &z_hat)),
                    CutFamily::McCormick => product_form(&pair.u, &pair.v, inst)
                        .and_then(|f| disjunction_mccormick(&f, &z_hat)),
                };
                let outcome = disjunction
                    .and_then(|d| solve_cglp(&base, &d, &z_hat, &var_lo, &var_hi, &cglp_settings));
                match outcome {
                    Ok(Some(c)) => {
                        if best.as_ref().is_none_or(|b| c.violation > b.violation) {
                            let provenance = Provenance { family, singular_index: k, iteration };
                            best = Some(Cut { row: c.row, violation: c.violation, provenance });
                        }
                    }
                    Ok(None) => {}
                    // a pair whose CGLP fails is skipped for this round
                    Err(_) => record.cglp_failures += 1,
                }
            }
            new_cuts.extend(best);
        }

        record.cuts_added = new_cuts.len();
        record.violations = new_cuts.iter().map(|c| c.violation).collect();
        for c in &new_cuts {
            model.add_row(c.row.clone());
        }
        cuts.extend(new_cuts);
        record.cumulative_cuts = cuts.len();
        let added = record.cuts_added;
        records.push(record);
        if timed_out {
            termination = Termination::TimeLimit;
            break;
        }
        if added == 0 {
            termination = Termination::NoViolatedCut;
            break;
        }
        iteration += 1;
    }

    // the relaxation is re-solved after every accepted round, so the last
    // record carries the bound with all cuts unless the loop was cut short
    let root_lb = records.first().map_or(f64::NAN, |r| r.lb);
    let final_lb = records.iter().rev().find(|r| r.lb.is_finite()).map_or(f64::NAN, |r| r.lb);
    Ok(BoundTrace {
        variant: config.variant,
        root_lb,
        records,
        final_lb,
        termination,
        cuts: cuts.iter().map(CutRecord::from).collect(),
        incumbents,
        failure,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Best box-feasible point found by alternating minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub z_bar: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// `min_z z'Mz + c'z` over a box by cyclic exact coordinate minimization,
/// started from `z`. Converges to the minimum for PSD `M`.
fn box_qp_descent(m: &crate::linalg::DenseMatrix, c: &[f64], lo: &[f64], hi: &[f64], z: &mut [f64]) {
    let k = z.len();
    // gradient of z'Mz + c'z is 2Mz + c; keep g = 2Mz + c up to date
    let mut g: Vec<f64> = m.matvec(z).iter().zip(c).map(|(a, b)| 2.0 * a + b).collect();
    let scale = 1.0 + lo.iter().chain(hi).fold(0.0_f64, |a, v| a.max(v.abs()));
    for _ in 0..2000 {
        let mut moved = 0.0_f64;
        for i in 0..k {
            let mii = m[(i, i)];
            // g_i without the diagonal term: 2 sum_{j != i} M_ij z_j + c_i
            let lin = g[i] - 2.0 * mii * z[i];
            let target = if mii > 1e-14 {
                (-lin / (2.0 * mii)).clamp(lo[i], hi[i])
            } else if lin > 0.0 {
                lo[i]
            } else if lin < 0.0 {
                hi[i]
            } else {
                z[i]
            };
            let delta = target - z[i];
            if delta != 0.0 {
                z[i] = target;
                for j in 0..k {
                    g[j] += 2.0 * (m[(j, i)]) * delta;
                }
                moved = moved.max(delta.abs());
            }
        }
        if moved <= 1e-13 * scale {
            break;
        }
    }
}

/// Multistart alternating minimization: the first start is the box centre,
/// the rest are uniform in the box. Deterministic per `seed`.
pub fn upper_bound(inst: &BilinearInstance, num_starts: usize, seed: u64) -> UpperBound {
    let (n, m) = (inst.n(), inst.m());
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let mut best: Option<UpperBound> = None;
    for s in 0..num_starts.max(1) {
        let mut x: Vec<f64> = if s == 0 {
            (0..n).map(|i| 0.5 * (inst.ax[i] + inst.bx[i])).collect()
        } else {
            (0..n).map(|i| rng.uniform(inst.ax[i], inst.bx[i])).collect()
        };
        let mut y: Vec<f64> = if s == 0 {
            (0..m).map(|j| 0.5 * (inst.ay[j] + inst.by[j])).collect()
        } else {
            (0..m).map(|j| rng.uniform(inst.ay[j], inst.by[j])).collect()
        };
        let mut f = true_objective(inst, &x, &y);
        for _ in 0..500 {
            let cx = inst.a.matvec(&y);
            box_qp_descent(&inst.q, &cx, &inst.ax, &inst.bx, &mut x);
            let cy = inst.a.matvec_t(&x);
            box_qp_descent(&inst.r, &cy, &inst.ay, &inst.by, &mut y);
            let f_new = true_objective(inst, &x, &y);
            let stalled = f - f_new <= 1e-8 * (1.0 + f.abs());
            f = f_new;
            if stalled {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| f < b.z_bar) {
            best = Some(UpperBound { z_bar: f, x, y });
        }
    }
    best.expect("at least one start")
}

/// `(z_bar - lb) / max(|z_bar|, eps) * 100`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeGap {
    pub percent: f64,
    /// `|z_bar|` fell below the guard, so the value is not meaningful.
    pub degenerate: bool,
}

pub fn relative_gap(z_bar: f64, lb: f64) -> RelativeGap {
    let degenerate = z_bar.abs() < GAP_EPS;
    RelativeGap { percent: (z_bar - lb) / z_bar.abs().max(GAP_EPS) * 100.0, degenerate }
}

/// Share of the root gap closed, in `[0, 100]`. `RootGapZero` means there
/// was nothing to close; report it as 100.
pub fn gap_closed(z_bar: f64, lb_root: f64, lb_final: f64) -> Result<f64, DriverError> {
    let den = z_bar - lb_root;
    if den <= GAP_CLOSED_EPS {
        return Err(DriverError::RootGapZero);
    }
    Ok(((lb_final - lb_root) / den * 100.0).clamp(0.0, 100.0))
}

/// A lower-bounding method of the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Smc,
    Bmc,
    BmcDisj,
    BmcExtDisj,
    BmcMixed,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Smc, Method::Bmc, Method::BmcDisj, Method::BmcExtDisj, Method::BmcMixed];

    pub fn name(self) -> &'static str {
        match self {
            Method::Smc => "S.Mc",
            Method::Bmc => "B.Mc",
            Method::BmcDisj => "B.Mc.Disj",
            Method::BmcExtDisj => "B.Mc.ExtDisj",
            Method::BmcMixed => "B.Mc.Mixed",
        }
    }

    pub fn loop_variant(self) -> Option<LoopVariant> {
        match self {
            Method::BmcDisj => Some(LoopVariant::Disj),
            Method::BmcExtDisj => Some(LoopVariant::ExtDisj),
            Method::BmcMixed => Some(LoopVariant::Mixed),
            Method::Smc | Method::Bmc => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['.', '-', '_'], "");
        Method::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase().replace('.', "") == key)
            .ok_or_else(|| format!("unknown method \"{s}\" (expected one of S.Mc, B.Mc, B.Mc.Disj, B.Mc.ExtDisj, B.Mc.Mixed)"))
    }
}

/// Lower bound of one method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub lb: f64,
    /// B.Mc value, for the gap-closed metric of the loops.
    pub root_lb: Option<f64>,
    pub cuts_added: usize,
    pub termination: Option<Termination>,
    pub trace: Option<BoundTrace>,
    pub seconds: f64,
    /// Set when the method did not produce a bound.
    pub error: Option<String>,
}

/// Runs `method` on `inst`; loop methods use `loop_config` with the variant replaced.
pub fn run_method(inst: &BilinearInstance, method: Method, loop_config: &LoopConfig) -> MethodOutcome {
    let start = Instant::now();
    let mut out = MethodOutcome {
        method,
        lb: f64::NAN,
        root_lb: None,
        cuts_added: 0,
        termination: None,
        trace: None,
        seconds: 0.0,
        error: None,
    };
    let relaxation = |model: Result<(crate::solver::QuadraticModel, VariableMap), RelaxationError>| {
        let (model, _) = model.map_err(|e| e.to_string())?;
        let res = solve(&model).map_err(|e| e.to_string())?;
        if res.status == SolveStatus::Optimal {
            Ok(res.objective)
        } else {
            Err(format!("relaxation status {:?}", res.status))
        }
    };
    match method.loop_variant() {
        None => {
            let model = if method == Method::Smc { build_smc(inst) } else { build_bmc(inst) };
            match relaxation(model) {
                Ok(lb) => out.lb = lb,
                Err(e) => out.error = Some(e),
            }
        }
        Some(variant) => match cutting_plane(inst, &LoopConfig { variant, ..*loop_config }) {
            Ok(trace) => {
                out.lb = trace.final_lb;
                out.root_lb = Some(trace.root_lb);
                out.cuts_added = trace.total_cuts();
                out.termination = Some(trace.termination);
                if trace.termination == Termination::SolverFailure && !trace.final_lb.is_finite() {
                    out.error = trace.failure.clone();
                }
                out.trace = Some(trace);
            }
            Err(e) => out.error = Some(e.to_string()),
        },
    }
    out.seconds = start.elapsed().as_secs_f64();
    out
}

/// Upper bound and per-method gaps on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub z_bar: f64,
    pub entries: Vec<GapEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub method: Method,
    pub lb: f64,
    pub relative_gap: RelativeGap,
    /// Loop methods only; 100 when the root gap was already zero.
    pub gap_closed: Option<f64>,
}

impl GapReport {
    pub fn new(z_bar: f64, outcomes: &[MethodOutcome]) -> Self {
        let entries = outcomes
            .iter()
            .map(|o| GapEntry {
                method: o.method,
                lb: o.lb,
                relative_gap: relative_gap(z_bar, o.lb),
                gap_closed: o.root_lb.map(|root| gap_closed(z_bar, root, o.lb).unwrap_or(100.0)),
            })
            .collect();
        Self { z_bar, entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GenParams};
    use crate::linalg::DenseMatrix;

    fn params(n: usize, m: usize, seed: u64) -> GenParams {
        GenParams { n, m, density_a: 1.0, rank_frac_q: 0.5, rank_frac_r: 0.5, seed }
    }

    fn corner_min(inst: &BilinearInstance) -> f64 {
        // n = m = 1 with Q = R = 0: the minimum of a bilinear form is at a corner
        let mut best = f64::INFINITY;
        for x in [inst.ax[0], inst.bx[0]] {
            for y in [inst.ay[0], inst.by[0]] {
                best = best.min(true_objective(inst, &[x], &[y]));
            }
        }
        best
    }

    #[test]
    fn zero_bilinear_part_stops_at_root() {
        let mut inst = generate(&params(4, 3, 1)).unwrap();
        inst.a = DenseMatrix::zeros(4, 3);
        let trace = cutting_plane(&inst, &LoopConfig::new(LoopVariant::ExtDisj)).unwrap();
        assert_eq!(trace.termination, Termination::NoViolatedCut);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].sigma_plus, 0);
        assert_eq!(trace.final_lb, trace.root_lb);
    }

    #[test]
    fn single_product_root_is_exact() {
        let z = DenseMatrix::zeros(1, 1);
        let inst = BilinearInstance::with_unit_boxes(DenseMatrix::from_diag(&[1.0]), z.clone(), z);
        for variant in [LoopVariant::Disj, LoopVariant::ExtDisj, LoopVariant::Mixed] {
            let trace = cutting_plane(&inst, &LoopConfig::new(variant)).unwrap();
            assert!((trace.root_lb + 1.0).abs() < 1e-7);
            assert!((trace.final_lb - corner_min(&inst)).abs() < 1e-7);
            assert!(trace.total_cuts() == 0 || trace.final_lb <= -1.0 + 1e-7);
        }
    }

    #[test]
    fn loops_tighten_and_respect_limits() {
        let inst = generate(&params(5, 4, 2)).unwrap();
        let ub = upper_bound(&inst, 16, 0);
        for variant in [LoopVariant::Disj, LoopVariant::ExtDisj, LoopVariant::Mixed] {
            let config = LoopConfig { max_n_cuts: 10, ..LoopConfig::new(variant) };
            let trace = cutting_plane(&inst, &config).unwrap();
            assert!(trace.total_cuts() <= 10);
            assert!(trace.is_monotone(1e-7));
            assert!(trace.final_lb >= trace.root_lb - 1e-7);
            assert!(trace.final_lb <= ub.z_bar + 1e-6);
            for r in &trace.records {
                assert!(r.cuts_added <= 4.min(r.sigma_plus));
                assert!(r.violations.iter().all(|v| *v > 1e-6));
            }
            assert!(trace.total_cuts() > 0, "{variant:?} found no cut");
        }
    }

    #[test]
    fn traces_are_deterministic() {
        let inst = generate(&params(4, 4, 5)).unwrap();
        let config = LoopConfig { max_n_cuts: 8, ..LoopConfig::new(LoopVariant::Disj) };
        let a = cutting_plane(&inst, &config).unwrap();
        let b = cutting_plane(&inst, &config).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.cuts, b.cuts);
    }

    #[test]
    fn config_validation() {
        let inst = generate(&params(2, 2, 0)).unwrap();
        let bad = LoopConfig { max_n_cuts: 0, ..LoopConfig::new(LoopVariant::Disj) };
        assert!(matches!(cutting_plane(&inst, &bad), Err(DriverError::InvalidConfig(_))));
        let bad = LoopConfig { time_limit: Some(0.0), ..LoopConfig::new(LoopVariant::Disj) };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn time_limit_keeps_partial_trace() {
        let inst = generate(&params(6, 6, 3)).unwrap();
        let config = LoopConfig { time_limit: Some(1e-9), ..LoopConfig::new(LoopVariant::ExtDisj) };
        let trace = cutting_plane(&inst, &config).unwrap();
        assert_eq!(trace.termination, Termination::TimeLimit);
        assert_eq!(trace.records.len(), 1);
        assert!(trace.root_lb.is_finite());
    }

    #[test]
    fn upper_bound_examples() {
        // ||x - y||^2 with Q = R = I, A = -2I
        let n = 3;
        let inst = BilinearInstance::with_unit_boxes(
            DenseMatrix::identity(n).scale(-2.0),
            DenseMatrix::identity(n),
            DenseMatrix::identity(n),
        );
        assert!(upper_bound(&inst, 4, 1).z_bar.abs() < 1e-12);

        let zero = BilinearInstance::with_unit_boxes(DenseMatrix::zeros(2, 2), DenseMatrix::zeros(2, 2), DenseMatrix::zeros(2, 2));
        let ub = upper_bound(&zero, 4, 1);
        assert_eq!(ub.z_bar, 0.0);

        let z = DenseMatrix::zeros(1, 1);
        let single = BilinearInstance::with_unit_boxes(DenseMatrix::from_diag(&[1.0]), z.clone(), z);
        let ub = upper_bound(&single, 32, 7);
        assert_eq!(ub.z_bar, -1.0);
        assert_eq!(ub.x[0] * ub.y[0], -1.0);
    }

    #[test]
    fn upper_bound_is_feasible_and_deterministic() {
        let inst = generate(&params(8, 5, 4)).unwrap();
        let a = upper_bound(&inst, 8, 11);
        let b = upper_bound(&inst, 8, 11);
        assert_eq!(a, b);
        assert!(a.x.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(a.y.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(a.z_bar, true_objective(&inst, &a.x, &a.y));
        let (model, _) = build_bmc(&inst).unwrap();
        assert!(solve(&model).unwrap().objective <= a.z_bar + 1e-7);
    }

    #[test]
    fn gap_metrics() {
        assert_eq!(relative_gap(10.0, 8.0).percent, 20.0);
        assert_eq!(relative_gap(-4.0, -4.0).percent, 0.0);
        let g = relative_gap(0.0, -1.0);
        assert!(g.degenerate && g.percent == 1e10);
        assert!(!relative_gap(-2.0, -3.0).degenerate);

        assert_eq!(gap_closed(5.0, 1.0, 5.0).unwrap(), 100.0);
        assert_eq!(gap_closed(5.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(gap_closed(0.0, -2.0, -1.0).unwrap(), 50.0);
        assert!(matches!(gap_closed(1.0, 1.0, 1.0), Err(DriverError::RootGapZero)));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("bmc-extdisj".parse::<Method>().unwrap(), Method::BmcExtDisj);
        assert!("B.Mc.X".parse::<Method>().is_err());
    }

    #[test]
    fn gap_report_uses_root() {
        let inst = generate(&params(4, 3, 8)).unwrap();
        let config = LoopConfig { max_n_cuts: 4, ..LoopConfig::new(LoopVariant::ExtDisj) };
        let outs: Vec<MethodOutcome> =
            [Method::Smc, Method::Bmc, Method::BmcExtDisj].iter().map(|&m| run_method(&inst, m, &config)).collect();
        let ub = upper_bound(&inst, 8, 0);
        let rep = GapReport::new(ub.z_bar, &outs);
        assert!(rep.entries[1].lb >= rep.entries[0].lb - 1e-6);
        assert!(rep.entries[0].gap_closed.is_none() && rep.entries[1].gap_closed.is_none());
        let closed = rep.entries[2].gap_closed.unwrap();
        assert!((0.0..=100.0).contains(&closed));
        assert!((outs[2].root_lb.unwrap() - outs[1].lb).abs() < 1e-7);
    }
}
