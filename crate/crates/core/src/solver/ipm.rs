//! Mehrotra predictor-corrector interior-point method.
//!
//! Works on the slack form
//!
//! ```text
//!   min 1/2 x'Px + c'x   s.t.  A x = b,  G x + s = h,  x - s_l = l,  x + s_u = u,
//!                              s, s_l, s_u >= 0
//! ```
//!
//! Each Newton system is reduced to the quasidefinite augmented system
//!
//! ```text
//!   [ P + D_b + dp   A'     G'            ] [dx ]
//!   [ A             -dd     0             ] [dy ]
//!   [ G              0     -(S/Z + dd)    ] [dz ]
//! ```
//!
//! and factored with [`super::ldl`]; `dp`, `dd` are small static
//! regularizations removed again by iterative refinement.

use super::ldl::{LdlFactor, LdlSymbolic};
use super::{QpBackend, QuadraticModel, Sense, SolveResult, SolveStatus, SolverError};
use crate::linalg::norm_inf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub max_iterations: usize,
    /// Target for scaled primal and dual residuals.
    pub feasibility_tol: f64,
    /// Target for the relative duality gap.
    pub gap_tol: f64,
    /// Looser tolerances accepted when progress stalls; these are the
    /// `Optimal` contract.
    pub fallback_tol: f64,
    pub static_reg: f64,
    pub refinement_steps: usize,
    /// Give up after this many iterations without a new best merit.
    pub stall_iterations: usize,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            feasibility_tol: 1e-10,
            gap_tol: 1e-11,
            fallback_tol: 1e-7,
            static_reg: 1e-9,
            refinement_steps: 4,
            stall_iterations: 25,
        }
    }
}

/// Reference backend.
#[derive(Debug, Clone, Default)]
pub struct InteriorPoint {
    pub settings: IpmSettings,
}

impl InteriorPoint {
    pub fn with_settings(settings: IpmSettings) -> Self {
        Self { settings }
    }
}

impl QpBackend for InteriorPoint {
    fn name(&self) -> &str {
        "ipm"
    }

    fn solve(&self, model: &QuadraticModel) -> Result<SolveResult, SolverError> {
        model.check()?;
        let prob = match Prepared::new(model) {
            Ok(p) => p,
            Err(trivial) => return Ok(trivial),
        };
        Workspace::new(&prob, self.settings).run(model)
    }
}

/// Sparse rows in scaled `<=` / `=` form.
struct ScaledRow {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
    /// `original dual = factor * internal dual`
    dual_factor: f64,
    origin: usize,
}

struct Prepared {
    n: usize,
    c: Vec<f64>,
    p_diag: Vec<f64>,
    p_off: Vec<(usize, usize, f64)>,
    has_quadratic: bool,
    eq: Vec<ScaledRow>,
    ineq: Vec<ScaledRow>,
    lower: Vec<(usize, f64)>,
    upper: Vec<(usize, f64)>,
    num_rows: usize,
}

impl Prepared {
    /// Returns `Err` with a finished result when an empty row is infeasible.
    fn new(model: &QuadraticModel) -> Result<Self, SolveResult> {
        let n = model.num_vars;
        let mut p_diag = vec![0.0; n];
        let mut p_off = Vec::new();
        for &(i, j, v) in model.objective_quadratic.entries() {
            if i == j {
                p_diag[i] += v;
            } else {
                p_off.push((i, j, v));
            }
        }
        let mut eq = Vec::new();
        let mut ineq = Vec::new();
        for (r, row) in model.rows.iter().enumerate() {
            let coeffs: Vec<(usize, f64)> = row.coeffs.iter().copied().filter(|c| c.1 != 0.0).collect();
            if coeffs.is_empty() {
                let ok = match row.sense {
                    Sense::Le => 0.0 <= row.rhs + 1e-9,
                    Sense::Ge => 0.0 >= row.rhs - 1e-9,
                    Sense::Eq => row.rhs.abs() <= 1e-9,
                };
                if !ok {
                    return Err(SolveResult {
                        status: SolveStatus::Infeasible,
                        point: vec![0.0; n],
                        objective: f64::NAN,
                        duals: vec![0.0; model.rows.len()],
                        reduced_costs: vec![0.0; n],
                        iterations: 0,
                        primal_residual: f64::INFINITY,
                        relative_gap: f64::NAN,
                    });
                }
                continue;
            }
            let scale = 1.0 / coeffs.iter().fold(0.0_f64, |m, c| m.max(c.1.abs()));
            let sign = if row.sense == Sense::Ge { -1.0 } else { 1.0 };
            let scaled = ScaledRow {
                coeffs: coeffs.iter().map(|&(i, v)| (i, sign * scale * v)).collect(),
                rhs: sign * scale * row.rhs,
                dual_factor: sign * scale,
                origin: r,
            };
            if row.sense == Sense::Eq {
                eq.push(scaled);
            } else {
                ineq.push(scaled);
            }
        }
        let lower = (0..n).filter(|&i| model.var_lo[i].is_finite()).map(|i| (i, model.var_lo[i])).collect();
        let upper = (0..n).filter(|&i| model.var_hi[i].is_finite()).map(|i| (i, model.var_hi[i])).collect();
        Ok(Self {
            n,
            c: model.objective_linear.clone(),
            has_quadratic: !model.objective_quadratic.is_empty(),
            p_diag,
            p_off,
            eq,
            ineq,
            lower,
            upper,
            num_rows: model.rows.len(),
        })
    }

    fn p_times(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.p_diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for &(i, j, v) in &self.p_off {
            out[i] += v * x[j];
            out[j] += v * x[i];
        }
        out
    }

    fn rows_times(rows: &[ScaledRow], x: &[f64]) -> Vec<f64> {
        rows.iter().map(|r| r.coeffs.iter().map(|&(i, v)| v * x[i]).sum()).collect()
    }

    fn rows_t_add(rows: &[ScaledRow], y: &[f64], out: &mut [f64]) {
        for (r, &yr) in rows.iter().zip(y) {
            if yr != 0.0 {
                for &(i, v) in &r.coeffs {
                    out[i] += v * yr;
                }
            }
        }
    }
}

/// Primal-dual iterate.
#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    zg: Vec<f64>,
    sg: Vec<f64>,
    zl: Vec<f64>,
    sl: Vec<f64>,
    zu: Vec<f64>,
    su: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dzg: Vec<f64>,
    dsg: Vec<f64>,
    dzl: Vec<f64>,
    dsl: Vec<f64>,
    dzu: Vec<f64>,
    dsu: Vec<f64>,
}

impl Direction {
    fn is_finite(&self) -> bool {
        [&self.dx, &self.dy, &self.dzg, &self.dsg, &self.dzl, &self.dsl, &self.dzu, &self.dsu]
            .iter()
            .all(|v| v.iter().all(|a| a.is_finite()))
    }
}

struct Residuals {
    rd: Vec<f64>,
    rp: Vec<f64>,
    rg: Vec<f64>,
    rl: Vec<f64>,
    ru: Vec<f64>,
    pobj: f64,
    dobj: f64,
    mu: f64,
    primal: f64,
    dual: f64,
    gap: f64,
}

struct Workspace<'a> {
    prob: &'a Prepared,
    settings: IpmSettings,
    symbolic: LdlSymbolic,
    entry_values: Vec<f64>,
    me: usize,
    mi: usize,
    prim_scale: f64,
    dual_scale: f64,
}

impl<'a> Workspace<'a> {
    fn new(prob: &'a Prepared, settings: IpmSettings) -> Self {
        let n = prob.n;
        let me = prob.eq.len();
        let mi = prob.ineq.len();
        let mut entries = Vec::new();
        let mut entry_values = Vec::new();
        for &(i, j, v) in &prob.p_off {
            entries.push((i, j));
            entry_values.push(v);
        }
        for (e, row) in prob.eq.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                entries.push((j, n + e));
                entry_values.push(v);
            }
        }
        for (g, row) in prob.ineq.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                entries.push((j, n + me + g));
                entry_values.push(v);
            }
        }
        let symbolic = LdlSymbolic::new(n + me + mi, &entries);
        let rhs_norm = prob
            .eq
            .iter()
            .chain(&prob.ineq)
            .map(|r| r.rhs.abs())
            .chain(prob.lower.iter().chain(&prob.upper).map(|b| b.1.abs()))
            .fold(0.0, f64::max);
        Self {
            prob,
            settings,
            symbolic,
            entry_values,
            me,
            mi,
            prim_scale: 1.0 + rhs_norm,
            dual_scale: 1.0 + norm_inf(&prob.c),
        }
    }

    fn initial_point(&self) -> Iterate {
        let p = self.prob;
        let mut lo = vec![f64::NEG_INFINITY; p.n];
        let mut hi = vec![f64::INFINITY; p.n];
        for &(i, l) in &p.lower {
            lo[i] = l;
        }
        for &(i, u) in &p.upper {
            hi[i] = u;
        }
        let x: Vec<f64> = (0..p.n)
            .map(|i| match (lo[i].is_finite(), hi[i].is_finite()) {
                (true, true) => 0.5 * (lo[i] + hi[i]),
                (true, false) => lo[i].max(0.0) + 1.0,
                (false, true) => hi[i].min(0.0) - 1.0,
                (false, false) => 0.0,
            })
            .collect();
        let gx = Prepared::rows_times(&p.ineq, &x);
        let sg: Vec<f64> = p.ineq.iter().zip(&gx).map(|(r, v)| (r.rhs - v).max(1.0)).collect();
        let sl: Vec<f64> = p.lower.iter().map(|&(i, l)| (x[i] - l).max(1.0)).collect();
        let su: Vec<f64> = p.upper.iter().map(|&(i, u)| (u - x[i]).max(1.0)).collect();
        Iterate {
            x,
            y: vec![0.0; self.me],
            zg: vec![1.0; self.mi],
            sg,
            zl: vec![1.0; p.lower.len()],
            sl,
            zu: vec![1.0; p.upper.len()],
            su,
        }
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let p = self.prob;
        let px = p.p_times(&it.x);
        let quad: f64 = 0.5 * px.iter().zip(&it.x).map(|(a, b)| a * b).sum::<f64>();
        let lin: f64 = p.c.iter().zip(&it.x).map(|(a, b)| a * b).sum();
        let mut rd: Vec<f64> = px.iter().zip(&p.c).map(|(a, b)| a + b).collect();
        Prepared::rows_t_add(&p.eq, &it.y, &mut rd);
        Prepared::rows_t_add(&p.ineq, &it.zg, &mut rd);
        for (k, &(i, _)) in p.lower.iter().enumerate() {
            rd[i] -= it.zl[k];
        }
        for (k, &(i, _)) in p.upper.iter().enumerate() {
            rd[i] += it.zu[k];
        }
        let ax = Prepared::rows_times(&p.eq, &it.x);
        let rp: Vec<f64> = p.eq.iter().zip(&ax).map(|(r, v)| v - r.rhs).collect();
        let gx = Prepared::rows_times(&p.ineq, &it.x);
        let rg: Vec<f64> = p.ineq.iter().zip(&gx).zip(&it.sg).map(|((r, v), s)| v + s - r.rhs).collect();
        let rl: Vec<f64> = p.lower.iter().zip(&it.sl).map(|(&(i, l), s)| it.x[i] - s - l).collect();
        let ru: Vec<f64> = p.upper.iter().zip(&it.su).map(|(&(i, u), s)| it.x[i] + s - u).collect();

        let pobj = quad + lin;
        let mut dobj = -quad;
        dobj -= p.eq.iter().zip(&it.y).map(|(r, y)| r.rhs * y).sum::<f64>();
        dobj -= p.ineq.iter().zip(&it.zg).map(|(r, z)| r.rhs * z).sum::<f64>();
        dobj += p.lower.iter().zip(&it.zl).map(|(b, z)| b.1 * z).sum::<f64>();
        dobj -= p.upper.iter().zip(&it.zu).map(|(b, z)| b.1 * z).sum::<f64>();

        let compl: f64 = dotv(&it.sg, &it.zg) + dotv(&it.sl, &it.zl) + dotv(&it.su, &it.zu);
        let count = self.mi + p.lower.len() + p.upper.len();
        let mu = if count > 0 { compl / count as f64 } else { 0.0 };
        let primal = [norm_inf(&rp), norm_inf(&rg), norm_inf(&rl), norm_inf(&ru)].into_iter().fold(0.0, f64::max)
            / self.prim_scale;
        let dual = norm_inf(&rd) / self.dual_scale;
        let gap = ((pobj - dobj).abs().max(compl)) / (1.0 + pobj.abs());
        Residuals { rd, rp, rg, rl, ru, pobj, dobj, mu, primal, dual, gap }
    }

    /// Numeric KKT values for the current iterate: (regularized diag, true diag).
    fn kkt_diagonals(&self, it: &Iterate) -> (Vec<f64>, Vec<f64>) {
        let p = self.prob;
        let n = p.n;
        let dim = n + self.me + self.mi;
        let reg = self.settings.static_reg;
        let mut true_diag = vec![0.0; dim];
        true_diag[..n].copy_from_slice(&p.p_diag);
        for (k, &(i, _)) in p.lower.iter().enumerate() {
            true_diag[i] += it.zl[k] / it.sl[k];
        }
        for (k, &(i, _)) in p.upper.iter().enumerate() {
            true_diag[i] += it.zu[k] / it.su[k];
        }
        for g in 0..self.mi {
            true_diag[n + self.me + g] = -it.sg[g] / it.zg[g];
        }
        let mut reg_diag = true_diag.clone();
        for (k, d) in reg_diag.iter_mut().enumerate() {
            if k < n {
                *d += reg;
            } else {
                *d -= reg;
            }
        }
        (reg_diag, true_diag)
    }

    fn signs(&self) -> Vec<f64> {
        let n = self.prob.n;
        (0..n + self.me + self.mi).map(|k| if k < n { 1.0 } else { -1.0 }).collect()
    }

    fn solve_augmented(&self, fac: &LdlFactor, true_vals: &[f64], rhs: &[f64]) -> Vec<f64> {
        let residual = |sol: &[f64]| -> Vec<f64> {
            let k_sol = self.symbolic.multiply(true_vals, sol);
            rhs.iter().zip(&k_sol).map(|(a, b)| a - b).collect()
        };
        let mut sol = rhs.to_vec();
        self.symbolic.solve(fac, &mut sol);
        let scale = 1.0 + norm_inf(rhs);
        let mut res = residual(&sol);
        let mut res_norm = norm_inf(&res);
        for _ in 0..self.settings.refinement_steps {
            if !(res_norm > 1e-14 * scale) {
                break;
            }
            // refinement against the unregularized matrix can diverge when
            // pivots were bumped; keep a correction only if it helps
            self.symbolic.solve(fac, &mut res);
            let cand: Vec<f64> = sol.iter().zip(&res).map(|(s, d)| s + d).collect();
            let cand_res = residual(&cand);
            let cand_norm = norm_inf(&cand_res);
            if !(cand_norm < res_norm) {
                break;
            }
            sol = cand;
            res = cand_res;
            res_norm = cand_norm;
        }
        sol
    }

    /// Newton direction for complementarity targets `rc_*` (`s*z - target`).
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        res: &Residuals,
        fac: &LdlFactor,
        true_vals: &[f64],
        rc_g: &[f64],
        rc_l: &[f64],
        rc_u: &[f64],
    ) -> Direction {
        let p = self.prob;
        let n = p.n;
        let mut rhs = vec![0.0; n + self.me + self.mi];
        for i in 0..n {
            rhs[i] = -res.rd[i];
        }
        for (k, &(i, _)) in p.lower.iter().enumerate() {
            rhs[i] += (-rc_l[k] - it.zl[k] * res.rl[k]) / it.sl[k];
        }
        for (k, &(i, _)) in p.upper.iter().enumerate() {
            rhs[i] -= (-rc_u[k] + it.zu[k] * res.ru[k]) / it.su[k];
        }
        for e in 0..self.me {
            rhs[n + e] = -res.rp[e];
        }
        for g in 0..self.mi {
            rhs[n + self.me + g] = -res.rg[g] + rc_g[g] / it.zg[g];
        }
        let sol = self.solve_augmented(fac, true_vals, &rhs);
        let dx = sol[..n].to_vec();
        let dy = sol[n..n + self.me].to_vec();
        let dzg = sol[n + self.me..].to_vec();
        let dsg: Vec<f64> = (0..self.mi).map(|g| -(rc_g[g] + it.sg[g] * dzg[g]) / it.zg[g]).collect();
        let dsl: Vec<f64> = p.lower.iter().enumerate().map(|(k, &(i, _))| dx[i] + res.rl[k]).collect();
        let dzl: Vec<f64> = (0..p.lower.len()).map(|k| (-rc_l[k] - it.zl[k] * dsl[k]) / it.sl[k]).collect();
        let dsu: Vec<f64> = p.upper.iter().enumerate().map(|(k, &(i, _))| -res.ru[k] - dx[i]).collect();
        let dzu: Vec<f64> = (0..p.upper.len()).map(|k| (-rc_u[k] - it.zu[k] * dsu[k]) / it.su[k]).collect();
        Direction { dx, dy, dzg, dsg, dzl, dsl, dzu, dsu }
    }

    fn run(&self, model: &QuadraticModel) -> Result<SolveResult, SolverError> {
        let p = self.prob;
        let mut it = self.initial_point();
        let signs = self.signs();
        let set = self.settings;
        let mut best: Option<(f64, Iterate)> = None;
        let mut stall = 0usize;
        let mut since_best = 0usize;
        let mut iterations = 0usize;
        let mut status = SolveStatus::IterationLimit;

        for iter in 0..set.max_iterations {
            iterations = iter;
            let res = self.residuals(&it);
            if !(res.pobj.is_finite() && res.dobj.is_finite() && res.mu.is_finite()) {
                break;
            }
            let merit = res.primal.max(res.dual).max(res.gap);
            if best.as_ref().is_none_or(|(m, _)| merit < *m) {
                best = Some((merit, it.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > set.stall_iterations {
                    break;
                }
            }
            if res.primal <= set.feasibility_tol && res.dual <= set.feasibility_tol && res.gap <= set.gap_tol {
                status = SolveStatus::Optimal;
                break;
            }
            if let Some(s) = self.certificate(&it, &res) {
                status = s;
                break;
            }

            let (reg_diag, true_diag) = self.kkt_diagonals(&it);
            let reg_vals = self.symbolic.assemble(&self.entry_values, &reg_diag);
            let true_vals = self.symbolic.assemble(&self.entry_values, &true_diag);
            // pivots bumped to a tiny value can overflow the elimination on
            // degenerate problems; retry with a larger bump
            let mut bump = set.static_reg;
            let mut fac = self.symbolic.factor(&reg_vals, &signs, 1e-13, bump);
            while !fac.is_finite() && bump < 1e-2 {
                bump *= 100.0;
                fac = self.symbolic.factor(&reg_vals, &signs, 1e-13, bump);
            }
            if !fac.is_finite() {
                break;
            }

            // predictor
            let rc_g: Vec<f64> = it.sg.iter().zip(&it.zg).map(|(s, z)| s * z).collect();
            let rc_l: Vec<f64> = it.sl.iter().zip(&it.zl).map(|(s, z)| s * z).collect();
            let rc_u: Vec<f64> = it.su.iter().zip(&it.zu).map(|(s, z)| s * z).collect();
            let aff = self.direction(&it, &res, &fac, &true_vals, &rc_g, &rc_l, &rc_u);
            let (ap_aff, ad_aff) = self.step_lengths(&it, &aff);
            let (ap_aff, ad_aff) = if p.has_quadratic {
                let a = ap_aff.min(ad_aff);
                (a, a)
            } else {
                (ap_aff, ad_aff)
            };
            let count = self.mi + p.lower.len() + p.upper.len();
            let sigma = if count == 0 || res.mu <= 0.0 {
                0.0
            } else {
                let mut c = 0.0;
                for g in 0..self.mi {
                    c += (it.sg[g] + ap_aff * aff.dsg[g]) * (it.zg[g] + ad_aff * aff.dzg[g]);
                }
                for k in 0..p.lower.len() {
                    c += (it.sl[k] + ap_aff * aff.dsl[k]) * (it.zl[k] + ad_aff * aff.dzl[k]);
                }
                for k in 0..p.upper.len() {
                    c += (it.su[k] + ap_aff * aff.dsu[k]) * (it.zu[k] + ad_aff * aff.dzu[k]);
                }
                let mu_aff = c / count as f64;
                (mu_aff / res.mu).powi(3).clamp(0.0, 1.0)
            };
            let target = sigma * res.mu;

            // corrector
            let rc_g: Vec<f64> =
                (0..self.mi).map(|g| it.sg[g] * it.zg[g] + aff.dsg[g] * aff.dzg[g] - target).collect();
            let rc_l: Vec<f64> =
                (0..p.lower.len()).map(|k| it.sl[k] * it.zl[k] + aff.dsl[k] * aff.dzl[k] - target).collect();
            let rc_u: Vec<f64> =
                (0..p.upper.len()).map(|k| it.su[k] * it.zu[k] + aff.dsu[k] * aff.dzu[k] - target).collect();
            let dir = self.direction(&it, &res, &fac, &true_vals, &rc_g, &rc_l, &rc_u);
            if !dir.is_finite() {
                break;
            }
            let (mut ap, mut ad) = self.step_lengths(&it, &dir);
            ap = (0.995 * ap).min(1.0);
            ad = (0.995 * ad).min(1.0);
            if p.has_quadratic {
                let a = ap.min(ad);
                ap = a;
                ad = a;
            }
            if ap.max(ad) < 1e-10 {
                stall += 1;
                if stall > 3 {
                    break;
                }
            } else {
                stall = 0;
            }
            axpy(ap, &dir.dx, &mut it.x);
            axpy(ap, &dir.dsg, &mut it.sg);
            axpy(ap, &dir.dsl, &mut it.sl);
            axpy(ap, &dir.dsu, &mut it.su);
            axpy(ad, &dir.dy, &mut it.y);
            axpy(ad, &dir.dzg, &mut it.zg);
            axpy(ad, &dir.dzl, &mut it.zl);
            axpy(ad, &dir.dzu, &mut it.zu);
        }

        if status == SolveStatus::IterationLimit {
            // accept the best iterate if it meets the contract tolerances
            if let Some((merit, cand)) = best {
                if merit <= set.fallback_tol {
                    it = cand;
                    status = SolveStatus::Optimal;
                } else {
                    let res = self.residuals(&cand);
                    if !(res.pobj.is_finite() && res.dobj.is_finite()) {
                        return Err(SolverError::NumericalFailure("non-finite iterate".into()));
                    }
                    if res.primal > 1e-6 && res.dual <= 1e-6 {
                        status = SolveStatus::Infeasible;
                    } else if res.dual > 1e-6 && res.primal <= 1e-6 && res.pobj < -1e6 {
                        status = SolveStatus::Unbounded;
                    }
                    it = cand;
                }
            }
        }
        Ok(self.finish(model, &it, status, iterations))
    }

    /// Largest steps keeping slacks and multipliers non-negative.
    fn step_lengths(&self, it: &Iterate, d: &Direction) -> (f64, f64) {
        let ratio = |v: &[f64], dv: &[f64], acc: f64| {
            v.iter().zip(dv).fold(acc, |a, (x, dx)| if *dx < 0.0 { a.min(-x / dx) } else { a })
        };
        let mut ap = 1.0_f64 / 0.995;
        ap = ratio(&it.sg, &d.dsg, ap);
        ap = ratio(&it.sl, &d.dsl, ap);
        ap = ratio(&it.su, &d.dsu, ap);
        let mut ad = 1.0_f64 / 0.995;
        ad = ratio(&it.zg, &d.dzg, ad);
        ad = ratio(&it.zl, &d.dzl, ad);
        ad = ratio(&it.zu, &d.dzu, ad);
        (ap, ad)
    }

    /// Infeasibility / unboundedness certificates from diverging iterates.
    fn certificate(&self, it: &Iterate, res: &Residuals) -> Option<SolveStatus> {
        let p = self.prob;
        let dual_norm = [norm_inf(&it.y), norm_inf(&it.zg), norm_inf(&it.zl), norm_inf(&it.zu)]
            .into_iter()
            .fold(0.0, f64::max);
        if dual_norm > 1e7 * self.dual_scale {
            let mut ray = vec![0.0; p.n];
            Prepared::rows_t_add(&p.eq, &it.y, &mut ray);
            Prepared::rows_t_add(&p.ineq, &it.zg, &mut ray);
            for (k, &(i, _)) in p.lower.iter().enumerate() {
                ray[i] -= it.zl[k];
            }
            for (k, &(i, _)) in p.upper.iter().enumerate() {
                ray[i] += it.zu[k];
            }
            let mut obj = 0.0;
            obj += p.eq.iter().zip(&it.y).map(|(r, y)| r.rhs * y).sum::<f64>();
            obj += p.ineq.iter().zip(&it.zg).map(|(r, z)| r.rhs * z).sum::<f64>();
            obj -= p.lower.iter().zip(&it.zl).map(|(b, z)| b.1 * z).sum::<f64>();
            obj += p.upper.iter().zip(&it.zu).map(|(b, z)| b.1 * z).sum::<f64>();
            if -obj > 0.0 && norm_inf(&ray) <= 1e-6 * (-obj) {
                return Some(SolveStatus::Infeasible);
            }
        }
        let xn = norm_inf(&it.x);
        if xn > 1e8 * self.prim_scale && res.pobj < 0.0 {
            let d: Vec<f64> = it.x.iter().map(|v| v / xn).collect();
            let cd: f64 = dotv(&p.c, &d);
            let pd = norm_inf(&p.p_times(&d));
            let ad = norm_inf(&Prepared::rows_times(&p.eq, &d));
            let gd = Prepared::rows_times(&p.ineq, &d).into_iter().fold(f64::NEG_INFINITY, f64::max);
            let lower_ok = p.lower.iter().all(|&(i, _)| d[i] >= -1e-6);
            let upper_ok = p.upper.iter().all(|&(i, _)| d[i] <= 1e-6);
            if cd < -1e-9 && pd <= 1e-6 && ad <= 1e-6 && gd <= 1e-6 && lower_ok && upper_ok {
                return Some(SolveStatus::Unbounded);
            }
        }
        None
    }

    fn finish(&self, model: &QuadraticModel, it: &Iterate, status: SolveStatus, iterations: usize) -> SolveResult {
        let p = self.prob;
        let res = self.residuals(it);
        let mut duals = vec![0.0; p.num_rows];
        for (row, y) in p.eq.iter().zip(&it.y) {
            duals[row.origin] = row.dual_factor * y;
        }
        for (row, z) in p.ineq.iter().zip(&it.zg) {
            duals[row.origin] = row.dual_factor * z;
        }
        let mut reduced_costs = vec![0.0; p.n];
        for (k, &(i, _)) in p.lower.iter().enumerate() {
            reduced_costs[i] -= it.zl[k];
        }
        for (k, &(i, _)) in p.upper.iter().enumerate() {
            reduced_costs[i] += it.zu[k];
        }
        SolveResult {
            status,
            objective: model.objective_value(&it.x),
            point: it.x.clone(),
            duals,
            reduced_costs,
            iterations,
            primal_residual: res.primal * self.prim_scale,
            relative_gap: res.gap,
        }
    }
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
