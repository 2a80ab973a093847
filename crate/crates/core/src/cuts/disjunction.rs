//! 4-way disjunctions from splitting two ranges at the incumbent.

use super::forms::{eval, tangent_linearize, ProductForm, SeparableForm};
use super::{CutError, MIN_INTERVAL_WIDTH};
use crate::relaxations::{mccormick_rows_expr, LinExpr};
use crate::solver::LinearRow;

/// Split points are kept this fraction of the width away from either end.
pub const SPLIT_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DisjunctionKind {
    /// Splits of `q1`, `q2` with sub-interval secants.
    Saxena,
    /// Splits of `p1`, `p2` with sub-box McCormick rows.
    McCormick,
}

/// Four disjuncts in `(lo, lo), (lo, hi), (hi, lo), (hi, hi)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Disjunction {
    pub kind: DisjunctionKind,
    pub splits: (f64, f64),
    pub disjuncts: Vec<Vec<LinearRow>>,
}

impl Disjunction {
    /// Largest row violation of `z` in each disjunct.
    pub fn violations(&self, z: &[f64]) -> Vec<f64> {
        self.disjuncts.iter().map(|d| d.iter().map(|r| r.violation(z)).fold(0.0, f64::max)).collect()
    }

    /// Whether `z` satisfies some disjunct to `tol`.
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        self.violations(z).into_iter().any(|v| v <= tol)
    }
}

/// The incumbent's value clamped into the interior of `[lo, hi]`.
pub fn split_point(lo: f64, hi: f64, value: f64) -> Result<f64, CutError> {
    let width = hi - lo;
    if !(width >= MIN_INTERVAL_WIDTH) {
        return Err(CutError::DegenerateInterval { lo, hi });
    }
    Ok(value.clamp(lo + SPLIT_MARGIN * width, hi - SPLIT_MARGIN * width))
}

fn halves((lo, hi): (f64, f64), eta: f64) -> [(f64, f64); 2] {
    [(lo, eta), (eta, hi)]
}

fn interval_rows(expr: &LinExpr, (lo, hi): (f64, f64)) -> [LinearRow; 2] {
    [LinearRow::ge(expr.clone(), lo), LinearRow::le(expr.clone(), hi)]
}

/// Splits `q1` and `q2` at the incumbent; each disjunct carries the interval
/// rows and `sec1`/`sec2` with secants on its sub-intervals, the convex
/// squares tangent-linearized at `z_hat`.
pub fn disjunction_saxena(form: &SeparableForm, z_hat: &[f64]) -> Result<Disjunction, CutError> {
    let (q1, q2, _) = form.evaluate(z_hat);
    let eta1 = split_point(form.q1_bounds.0, form.q1_bounds.1, q1)?;
    let eta2 = split_point(form.q2_bounds.0, form.q2_bounds.1, q2)?;
    let mut disjuncts = Vec::with_capacity(4);
    for i1 in halves(form.q1_bounds, eta1) {
        for i2 in halves(form.q2_bounds, eta2) {
            let mut rows = Vec::with_capacity(6);
            rows.extend(interval_rows(form.q1(), i1));
            rows.extend(interval_rows(form.q2(), i2));
            rows.push(tangent_linearize(&form.sec1_on(i1), z_hat));
            rows.push(tangent_linearize(&form.sec2_on(i2), z_hat));
            disjuncts.push(rows);
        }
    }
    Ok(Disjunction { kind: DisjunctionKind::Saxena, splits: (eta1, eta2), disjuncts })
}

/// Splits `p1` and `p2` at the incumbent; each disjunct carries the interval
/// rows and the McCormick rows of `s = p1 p2` on its sub-box.
pub fn disjunction_mccormick(form: &ProductForm, z_hat: &[f64]) -> Result<Disjunction, CutError> {
    let p1 = eval(form.p1(), z_hat);
    let p2 = eval(form.p2(), z_hat);
    let eta1 = split_point(form.p1_bounds.0, form.p1_bounds.1, p1)?;
    let eta2 = split_point(form.p2_bounds.0, form.p2_bounds.1, p2)?;
    let mut disjuncts = Vec::with_capacity(4);
    for i1 in halves(form.p1_bounds, eta1) {
        for i2 in halves(form.p2_bounds, eta2) {
            let mut rows = Vec::with_capacity(8);
            rows.extend(interval_rows(form.p1(), i1));
            rows.extend(interval_rows(form.p2(), i2));
            rows.extend(mccormick_rows_expr(form.s(), form.p1(), form.p2(), i1, i2)?);
            disjuncts.push(rows);
        }
    }
    Ok(Disjunction { kind: DisjunctionKind::McCormick, splits: (eta1, eta2), disjuncts })
}
