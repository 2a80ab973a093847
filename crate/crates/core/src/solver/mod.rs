//! LP / convex QP solving behind a single interface.
//!
//! Models are `min c'z + 1/2 z'Pz` subject to sparse linear rows and
//! (possibly infinite) variable bounds. The reference backend is the
//! primal-dual interior-point method in [`ipm`]; other backends plug in
//! through [`QpBackend`].
//!
//! Dual sign convention: at an optimum
//! `c + P z + sum_r duals[r] * a_r + reduced_costs = 0`, with `duals[r] >= 0`
//! for `<=` rows, `<= 0` for `>=` rows and free for `=` rows.

pub mod ipm;
pub mod ldl;

use thiserror::Error;

use crate::linalg::{sym_eig, DenseMatrix};

pub use ipm::{InteriorPoint, IpmSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("objective quadratic is not positive semidefinite (min eigenvalue {0:e})")]
    NotConvex(f64),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("unknown solver backend \"{0}\"")]
    UnknownBackend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `sum coeffs[k].1 * z[coeffs[k].0]  (sense)  rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { coeffs, sense, rhs }
    }

    pub fn le(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(coeffs, Sense::Le, rhs)
    }

    pub fn ge(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(coeffs, Sense::Ge, rhs)
    }

    /// Builds a row from a dense coefficient vector, dropping zeros.
    pub fn from_dense(coeffs: &[f64], sense: Sense, rhs: f64) -> Self {
        let sparse = coeffs.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect();
        Self::new(sparse, sense, rhs)
    }

    /// Sums duplicate indices and drops explicit zeros.
    pub fn normalized(mut self) -> Self {
        self.coeffs.sort_by_key(|c| c.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.coeffs.len());
        for (i, v) in self.coeffs {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => out.push((i, v)),
            }
        }
        out.retain(|c| c.1 != 0.0);
        self.coeffs = out;
        self
    }

    pub fn activity(&self, z: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, v)| v * z[i]).sum()
    }

    /// Amount by which `z` violates the row (0 when satisfied).
    pub fn violation(&self, z: &[f64]) -> f64 {
        let a = self.activity(z);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }

    /// The same constraint written as `<=` (equalities are rejected).
    pub fn as_le(&self) -> Option<LinearRow> {
        match self.sense {
            Sense::Le => Some(self.clone()),
            Sense::Ge => Some(LinearRow::le(self.coeffs.iter().map(|&(i, v)| (i, -v)).collect(), -self.rhs)),
            Sense::Eq => None,
        }
    }

    /// `<=` rows describing the same set; equalities become two rows.
    pub fn split_le(&self) -> Vec<LinearRow> {
        match self.sense {
            Sense::Eq => vec![
                LinearRow::le(self.coeffs.clone(), self.rhs),
                LinearRow::le(self.coeffs.iter().map(|&(i, v)| (i, -v)).collect(), -self.rhs),
            ],
            _ => vec![self.as_le().expect("inequality")],
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.coeffs.iter().map(|c| c.0).max()
    }
}

/// Symmetric matrix given by its upper-triangle entries `(i, j, v)`, `i <= j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymmetricSparse {
    entries: Vec<(usize, usize, f64)>,
}

impl SymmetricSparse {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            self.entries.push((a, b, v));
        }
    }

    /// Adds `scale * block` with its top-left corner at `(offset, offset)`.
    pub fn add_block(&mut self, offset: usize, block: &DenseMatrix, scale: f64) {
        for i in 0..block.rows() {
            for j in i..block.cols() {
                self.push(offset + i, offset + j, scale * block[(i, j)]);
            }
        }
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `P z`
    pub fn multiply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        for &(i, j, v) in &self.entries {
            out[i] += v * z[j];
            if i != j {
                out[j] += v * z[i];
            }
        }
        out
    }

    /// `z' P z`
    pub fn quad_form(&self, z: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, j, v)| if i == j { v * z[i] * z[i] } else { 2.0 * v * z[i] * z[j] }).sum()
    }

    /// Smallest eigenvalue of the submatrix on the variables it touches.
    pub fn min_eigenvalue(&self) -> f64 {
        let mut vars: Vec<usize> = self.entries.iter().flat_map(|&(i, j, _)| [i, j]).collect();
        vars.sort_unstable();
        vars.dedup();
        if vars.is_empty() {
            return 0.0;
        }
        let pos = |v: usize| vars.binary_search(&v).expect("touched var");
        let mut m = DenseMatrix::zeros(vars.len(), vars.len());
        for &(i, j, v) in &self.entries {
            let (a, b) = (pos(i), pos(j));
            m[(a, b)] += v;
            if a != b {
                m[(b, a)] += v;
            }
        }
        sym_eig(&m).map(|e| e.min_eigenvalue()).unwrap_or(f64::NEG_INFINITY)
    }
}

/// `min objective_linear'z + 1/2 z' objective_quadratic z` over rows and bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub num_vars: usize,
    pub objective_linear: Vec<f64>,
    pub objective_quadratic: SymmetricSparse,
    pub objective_constant: f64,
    pub rows: Vec<LinearRow>,
    pub var_lo: Vec<f64>,
    pub var_hi: Vec<f64>,
}

impl QuadraticModel {
    /// Model with zero objective, no rows and free variables.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective_linear: vec![0.0; num_vars],
            objective_quadratic: SymmetricSparse::new(),
            objective_constant: 0.0,
            rows: Vec::new(),
            var_lo: vec![f64::NEG_INFINITY; num_vars],
            var_hi: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn add_row(&mut self, row: LinearRow) {
        self.rows.push(row);
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        let lin: f64 = self.objective_linear.iter().zip(z).map(|(c, v)| c * v).sum();
        lin + 0.5 * self.objective_quadratic.quad_form(z) + self.objective_constant
    }

    /// Largest row or bound violation of `z`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(z)).fold(0.0, f64::max);
        let bounds = (0..self.num_vars)
            .map(|i| (self.var_lo[i] - z[i]).max(z[i] - self.var_hi[i]).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Checks dimensions, indices, finiteness and objective convexity.
    pub fn check(&self) -> Result<(), SolverError> {
        let n = self.num_vars;
        if self.objective_linear.len() != n || self.var_lo.len() != n || self.var_hi.len() != n {
            return Err(SolverError::InvalidModel("vector lengths differ from num_vars".into()));
        }
        if self.objective_linear.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidModel("non-finite objective".into()));
        }
        for i in 0..n {
            if self.var_lo[i].is_nan() || self.var_hi[i].is_nan() || self.var_lo[i] > self.var_hi[i] {
                return Err(SolverError::InvalidModel(format!("bad bounds on variable {i}")));
            }
            if self.var_lo[i] == f64::INFINITY || self.var_hi[i] == f64::NEG_INFINITY {
                return Err(SolverError::InvalidModel(format!("bound on variable {i} is infinite on the wrong side")));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SolverError::InvalidModel(format!("row {r} has a non-finite rhs")));
            }
            let mut seen: Vec<usize> = Vec::with_capacity(row.coeffs.len());
            for &(i, v) in &row.coeffs {
                if i >= n {
                    return Err(SolverError::InvalidModel(format!("row {r} references variable {i} >= {n}")));
                }
                if !v.is_finite() {
                    return Err(SolverError::InvalidModel(format!("row {r} has a non-finite coefficient")));
                }
                seen.push(i);
            }
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(SolverError::InvalidModel(format!("row {r} repeats a variable index")));
            }
        }
        for &(i, j, v) in self.objective_quadratic.entries() {
            if i >= n || j >= n || !v.is_finite() {
                return Err(SolverError::InvalidModel("bad quadratic objective entry".into()));
            }
        }
        if !self.objective_quadratic.is_empty() {
            let lam = self.objective_quadratic.min_eigenvalue();
            if lam < -1e-8 {
                return Err(SolverError::NotConvex(lam));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub point: Vec<f64>,
    pub objective: f64,
    /// One multiplier per model row.
    pub duals: Vec<f64>,
    /// Upper-bound minus lower-bound multipliers per variable.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub relative_gap: f64,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Anything that can solve a [`QuadraticModel`] under the contract above.
pub trait QpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, model: &QuadraticModel) -> Result<SolveResult, SolverError>;
}

/// Solves with the reference interior-point backend.
pub fn solve(model: &QuadraticModel) -> Result<SolveResult, SolverError> {
    InteriorPoint::default().solve(model)
}

/// Resolves the `solver.backend` configuration value.
pub fn backend_from_config(name: &str) -> Result<Box<dyn QpBackend>, SolverError> {
    match name.trim() {
        "" | "ipm" | "interior-point" => Ok(Box::new(InteriorPoint::default())),
        other => Err(SolverError::UnknownBackend(other.to_string())),
    }
}
