//! From a relaxation solution to accepted cuts.
//!
//! The lifting violation `W - xy'` is decomposed by SVD; each singular pair
//! `(u, v)` yields a violated non-convex inequality
//! `<uv', W> - (u'x)(v'y) <= 0`, which is relaxed either in separable form
//! (`q1 = (u'x + v'y)/2`, `q2 = (u'x - v'y)/2`, secants on the concave
//! squares) or in product form (McCormick on `p1 = u'x`, `p2 = v'y`). Splitting
//! both ranges gives a 4-way disjunction, and a cut-generating LP separates
//! the incumbent from the union.

pub mod cglp;
pub mod disjunction;
pub mod forms;
pub mod theory;

use thiserror::Error;

use crate::linalg::{svd, zero_singular_threshold, DenseMatrix, LinalgError};
use crate::relaxations::RelaxationError;
use crate::solver::{LinearRow, SolverError};

pub use cglp::{solve_cglp, CglpCut, CglpSettings};
pub use disjunction::{disjunction_mccormick, disjunction_saxena, split_point, Disjunction, DisjunctionKind};
pub use forms::{
    extended_mccormick_rows, product_form, secant_inequalities, separable_form, tangent_linearize,
    unit_vector_rows, ProductForm, QuadraticInequality, SeparableForm,
};
pub use theory::{
    addmc_rhs, compare_addmc_saxmf, midpoint_gap, saxmf_rhs, verify_theorem1, Theorem1Report, Theorem2Class,
};

/// Sub-intervals narrower than this cannot be split.
pub const MIN_INTERVAL_WIDTH: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CutError {
    #[error("interval [{lo}, {hi}] is too narrow to split")]
    DegenerateInterval { lo: f64, hi: f64 },
    #[error("cut-generating LP failed: {0}")]
    CglpNumericalFailure(String),
    #[error("PSD precondition violated (min eigenvalue {0:e})")]
    PsdViolated(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
}

/// Left/right singular vectors of `W - xy'` for one positive singular value.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPair {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Singular pairs of `W_hat - x_hat y_hat'` above the zero threshold, by
/// decreasing singular value.
pub fn violation_svd(w_hat: &DenseMatrix, x_hat: &[f64], y_hat: &[f64]) -> Result<Vec<SingularPair>, CutError> {
    if w_hat.rows() != x_hat.len() || w_hat.cols() != y_hat.len() {
        return Err(CutError::Dimension(format!(
            "W is {}x{}, x has {}, y has {}",
            w_hat.rows(),
            w_hat.cols(),
            x_hat.len(),
            y_hat.len()
        )));
    }
    let residual = w_hat.sub(&DenseMatrix::outer(x_hat, y_hat));
    let dec = svd(&residual)?;
    let cut = zero_singular_threshold(&dec.singular_values);
    Ok(dec
        .singular_values
        .iter()
        .enumerate()
        .take_while(|(_, &s)| s > cut)
        .map(|(k, &sigma)| SingularPair { sigma, u: dec.u.column(k), v: dec.v.column(k) })
        .collect())
}

/// Which relaxation of the singular-pair inequality produced a cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum CutFamily {
    /// Separable form with secants (the `Disj` loop).
    Saxena,
    /// Product form with McCormick rows (the `ExtDisj` loop).
    McCormick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub family: CutFamily,
    /// Position of the singular value, 0 = largest.
    pub singular_index: usize,
    pub iteration: usize,
}

/// An accepted `<=` cut over the bilinear lifted space.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub row: LinearRow,
    pub violation: f64,
    pub provenance: Provenance,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_residual() {
        let x = [0.5, -0.5, 0.0];
        let y = [1.0, 0.25];
        let mut w = DenseMatrix::outer(&x, &y);
        w[(0, 0)] += 1.0;
        let pairs = violation_svd(&w, &x, &y).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].sigma - 1.0).abs() < 1e-12);
        assert!((pairs[0].u[0].abs() - 1.0).abs() < 1e-12);
        assert!((pairs[0].v[0].abs() - 1.0).abs() < 1e-12);
        assert!(pairs[0].u[0] * pairs[0].v[0] > 0.0);
    }

    #[test]
    fn exact_lifting_has_no_pairs() {
        let x = [0.3, -0.7];
        let y = [0.1, 0.9, -1.0];
        assert!(violation_svd(&DenseMatrix::outer(&x, &y), &x, &y).unwrap().is_empty());
    }

    #[test]
    fn diagonal_residual() {
        let x = [0.0; 3];
        let y = [0.0; 3];
        let w = DenseMatrix::from_diag(&[2.0, 1.0, 0.0]);
        let pairs = violation_svd(&w, &x, &y).unwrap();
        let sig: Vec<f64> = pairs.iter().map(|p| p.sigma).collect();
        assert_eq!(sig.len(), 2);
        assert!((sig[0] - 2.0).abs() < 1e-12 && (sig[1] - 1.0).abs() < 1e-12);
        for p in &pairs {
            let un: f64 = p.u.iter().map(|a| a * a).sum();
            let vn: f64 = p.v.iter().map(|a| a * a).sum();
            assert!((un - 1.0).abs() < 1e-10 && (vn - 1.0).abs() < 1e-10);
            // u' (W - xy') v = sigma
            assert!((w.bilinear(&p.u, &p.v) - p.sigma).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(violation_svd(&DenseMatrix::zeros(2, 2), &[0.0], &[0.0, 0.0]).is_err());
    }
}
