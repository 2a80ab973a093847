//! Cut-generating LP over a disjunction.
//!
//! With every disjunct written as `C_k z <= c_k` (base rows plus disjunct rows)
//! and the normalization `sum_k 1'mu_k = 1`, the CGLP
//!
//! ```text
//!   max a'z_hat - b   s.t.  a = C_k' mu_k,  b >= c_k' mu_k,  mu_k >= 0,
//! ```
//!
//! is solved through its dual
//!
//! ```text
//!   min t   s.t.  sum_k z_k = z_hat,  sum_k l_k = 1,  C_k z_k - c_k l_k <= t,  l >= 0,
//! ```
//!
//! which is smaller and always feasible. The multipliers of the dual are the
//! cut: `a` from the equality rows, `mu_k` from the disjunct rows. The right
//! side is then recomputed so the cut stays valid on the lifted box even when
//! `a = C_k' mu_k` holds only to solver accuracy.

use super::disjunction::Disjunction;
use super::forms::combine;
use super::CutError;
use crate::relaxations::LinExpr;
use crate::solver::ipm::{InteriorPoint, IpmSettings};
use crate::solver::{LinearRow, QpBackend, QuadraticModel, Sense, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CglpSettings {
    /// Minimum violation at `z_hat` after scaling `|a|_inf = 1`.
    pub violation_threshold: f64,
    /// Coefficients below this times `|a|_inf` are dropped.
    pub zero_rel: f64,
    pub ipm: IpmSettings,
}

impl Default for CglpSettings {
    fn default() -> Self {
        let ipm = IpmSettings { feasibility_tol: 1e-9, gap_tol: 1e-9, max_iterations: 100, ..IpmSettings::default() };
        Self { violation_threshold: 1e-6, zero_rel: 1e-10, ipm }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CglpCut {
    /// `a'z <= b` with `|a|_inf = 1`.
    pub row: LinearRow,
    /// `a'z_hat - b`.
    pub violation: f64,
    /// Optimal CGLP value (unscaled).
    pub cglp_value: f64,
    pub iterations: usize,
}

/// `<=` rows scaled to unit infinity norm; `None` if a row is `0 <= negative`.
fn scaled_le_rows(rows: &[LinearRow]) -> Option<Vec<(LinExpr, f64)>> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        for le in row.split_le() {
            let coeffs = combine(&[(1.0, &le.coeffs)]);
            let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.1.abs()));
            if scale == 0.0 {
                if le.rhs < -1e-12 {
                    return None;
                }
                continue;
            }
            out.push((coeffs.into_iter().map(|(i, v)| (i, v / scale)).collect(), le.rhs / scale));
        }
    }
    Some(out)
}

/// Most violated disjunctive cut at `z_hat`, if its violation exceeds the threshold.
///
/// `base_rows` must be valid for every feasible lifted point and should bound
/// the space (box rows included); `var_lo`/`var_hi` are finite bounds on every
/// lifted variable over the feasible set.
pub fn solve_cglp(
    base_rows: &[LinearRow],
    disjunction: &Disjunction,
    z_hat: &[f64],
    var_lo: &[f64],
    var_hi: &[f64],
    settings: &CglpSettings,
) -> Result<Option<CglpCut>, CutError> {
    let dim = z_hat.len();
    if var_lo.len() != dim || var_hi.len() != dim {
        return Err(CutError::Dimension(format!("z_hat has {dim} entries, bounds {} / {}", var_lo.len(), var_hi.len())));
    }
    if let Some(bad) = base_rows.iter().chain(disjunction.disjuncts.iter().flatten()).find_map(|r| r.max_index()) {
        if bad >= dim {
            return Err(CutError::Dimension(format!("row references variable {bad} >= {dim}")));
        }
    }
    let Some(base) = scaled_le_rows(base_rows) else {
        return Ok(None);
    };
    let systems: Vec<Vec<(LinExpr, f64)>> = disjunction
        .disjuncts
        .iter()
        .filter_map(|d| scaled_le_rows(d))
        .map(|extra| base.iter().cloned().chain(extra).collect())
        .collect();
    let k = systems.len();
    if k == 0 {
        return Ok(None);
    }

    let lambda = |d: usize| k * dim + d;
    let t = k * dim + k;
    let mut model = QuadraticModel::new(t + 1);
    model.objective_linear[t] = 1.0;
    // z_k = l_k x_k with x_k in the box and l_k in [0, 1]; the implied
    // bounds keep the disaggregated copies away from being free
    for d in 0..k {
        model.var_lo[lambda(d)] = 0.0;
        model.var_hi[lambda(d)] = 1.0;
        for j in 0..dim {
            model.var_lo[d * dim + j] = var_lo[j].min(0.0);
            model.var_hi[d * dim + j] = var_hi[j].max(0.0);
        }
    }
    for j in 0..dim {
        model.add_row(LinearRow::new((0..k).map(|d| (d * dim + j, 1.0)).collect(), Sense::Eq, z_hat[j]));
    }
    model.add_row(LinearRow::new((0..k).map(|d| (lambda(d), 1.0)).collect(), Sense::Eq, 1.0));
    for (d, rows) in systems.iter().enumerate() {
        for (coeffs, rhs) in rows {
            let mut c: Vec<(usize, f64)> = coeffs.iter().map(|&(i, v)| (d * dim + i, v)).collect();
            if *rhs != 0.0 {
                c.push((lambda(d), -rhs));
            }
            c.push((t, -1.0));
            model.add_row(LinearRow::le(c, 0.0));
        }
    }

    // the right side is recomputed from the multipliers, so a stalled solve
    // still yields a valid cut and only its strength suffers
    let res = InteriorPoint::with_settings(settings.ipm).solve(&model)?;
    match res.status {
        SolveStatus::Optimal if res.objective <= 0.0 => return Ok(None),
        SolveStatus::Optimal | SolveStatus::IterationLimit => {}
        other => return Err(CutError::CglpNumericalFailure(format!("status {other:?}"))),
    }
    if !res.duals.iter().all(|v| v.is_finite()) {
        return Err(CutError::CglpNumericalFailure("non-finite multipliers".into()));
    }

    let alpha: Vec<f64> = res.duals[..dim].iter().map(|y| -y).collect();
    let mut beta = f64::NEG_INFINITY;
    let mut offset = dim + 1;
    for rows in &systems {
        let mut lhs = vec![0.0; dim];
        let mut rhs = 0.0;
        for (r, (coeffs, c)) in rows.iter().enumerate() {
            let mu = res.duals[offset + r].max(0.0);
            if mu == 0.0 {
                continue;
            }
            for &(i, v) in coeffs {
                lhs[i] += mu * v;
            }
            rhs += mu * c;
        }
        offset += rows.len();
        // a'z = (C'mu)'z + (a - C'mu)'z <= c'mu + max over the box of the remainder
        let mut bound = rhs;
        for j in 0..dim {
            bound += box_max(alpha[j] - lhs[j], var_lo[j], var_hi[j]);
        }
        beta = beta.max(bound);
    }
    if !beta.is_finite() {
        return Ok(None);
    }

    let scale = alpha.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    if scale < 1e-12 {
        return Ok(None);
    }
    let mut coeffs = Vec::new();
    let mut beta = beta / scale;
    for (j, a) in alpha.iter().enumerate() {
        let a = a / scale;
        if a.abs() < settings.zero_rel {
            // dropping a*z_j costs at most max(-a z_j) on the box
            beta += box_max(-a, var_lo[j], var_hi[j]);
        } else {
            coeffs.push((j, a));
        }
    }
    let row = LinearRow::le(coeffs, beta);
    let violation = row.activity(z_hat) - beta;
    if !(violation > settings.violation_threshold) {
        return Ok(None);
    }
    Ok(Some(CglpCut { row, violation, cglp_value: res.objective, iterations: res.iterations }))
}

/// `max c z` over `lo <= z <= hi`.
fn box_max(c: f64, lo: f64, hi: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else if c > 0.0 {
        c * hi
    } else {
        c * lo
    }
}
