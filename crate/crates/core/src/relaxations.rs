//! McCormick relaxations of the lifted problem.
//!
//! * B.Mc keeps `x'Qx + y'Ry` and replaces `x'Ay` by `<A, W>` with `W ~ xy'`
//!   relaxed through McCormick rows on every entry.
//! * S.Mc lifts `h = (x; y)` to `H ~ hh'` and relaxes every entry of `H`,
//!   so the whole objective `<Gamma, H>` becomes linear.

use thiserror::Error;

use crate::instances::{BilinearInstance, InstanceError, PSD_TOL};
use crate::linalg::DenseMatrix;
use crate::solver::{LinearRow, QuadraticModel};

#[derive(Debug, Error)]
pub enum RelaxationError {
    #[error("bound inverted: [{lo}, {hi}]")]
    BoundInverted { lo: f64, hi: f64 },
    #[error("quadratic blocks are not PSD (min eigenvalue {0:e})")]
    NotConvex(f64),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Sparse linear expression `sum c * z[i]`.
pub type LinExpr = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `x | y | W` (row-major).
    Bilinear,
    /// `h | H` (upper triangle, row-major).
    Symmetric,
}

/// Position of every original and lifted variable in a relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableMap {
    pub layout: Layout,
    pub n: usize,
    pub m: usize,
}

impl VariableMap {
    pub fn bilinear(n: usize, m: usize) -> Self {
        Self { layout: Layout::Bilinear, n, m }
    }

    pub fn symmetric(n: usize, m: usize) -> Self {
        Self { layout: Layout::Symmetric, n, m }
    }

    pub fn num_vars(&self) -> usize {
        let p = self.n + self.m;
        match self.layout {
            Layout::Bilinear => p + self.n * self.m,
            Layout::Symmetric => p + p * (p + 1) / 2,
        }
    }

    pub fn x(&self, i: usize) -> usize {
        debug_assert!(i < self.n);
        i
    }

    pub fn y(&self, j: usize) -> usize {
        debug_assert!(j < self.m);
        self.n + j
    }

    /// Index of `h_k`; the same slots as `x` then `y`.
    pub fn h(&self, k: usize) -> usize {
        debug_assert!(k < self.n + self.m);
        k
    }

    /// Index of `W(i, j)` in the bilinear layout.
    pub fn w(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.layout == Layout::Bilinear && i < self.n && j < self.m);
        self.n + self.m + i * self.m + j
    }

    /// Index of `H(i, j) = H(j, i)` in the symmetric layout.
    pub fn hh(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.layout == Layout::Symmetric);
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let p = self.n + self.m;
        debug_assert!(j < p);
        p + i * (2 * p - i + 1) / 2 + (j - i)
    }

    /// Lifted vector of `(x, y)` with exact products.
    pub fn lift(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.num_vars());
        z.extend_from_slice(x);
        z.extend_from_slice(y);
        match self.layout {
            Layout::Bilinear => {
                for xi in x {
                    z.extend(y.iter().map(|yj| xi * yj));
                }
            }
            Layout::Symmetric => {
                let h = z.clone();
                for i in 0..h.len() {
                    z.extend(h[i..].iter().map(|hj| h[i] * hj));
                }
            }
        }
        z
    }
}

/// Relaxation solution split into blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: DenseMatrix,
    /// Full symmetric `H` in the symmetric layout.
    pub h_mat: Option<DenseMatrix>,
}

impl LiftedPoint {
    pub fn from_vector(map: &VariableMap, z: &[f64]) -> Self {
        let (n, m) = (map.n, map.m);
        let x = z[..n].to_vec();
        let y = z[n..n + m].to_vec();
        match map.layout {
            Layout::Bilinear => {
                let w = DenseMatrix::from_row_major(n, m, z[n + m..n + m + n * m].to_vec());
                Self { x, y, w, h_mat: None }
            }
            Layout::Symmetric => {
                let p = n + m;
                let mut h = DenseMatrix::zeros(p, p);
                for i in 0..p {
                    for j in i..p {
                        h[(i, j)] = z[map.hh(i, j)];
                        h[(j, i)] = z[map.hh(i, j)];
                    }
                }
                let mut w = DenseMatrix::zeros(n, m);
                for i in 0..n {
                    for j in 0..m {
                        w[(i, j)] = h[(i, n + j)];
                    }
                }
                Self { x, y, w, h_mat: Some(h) }
            }
        }
    }

    /// Exact lifting `W = xy'`.
    pub fn exact(x: &[f64], y: &[f64]) -> Self {
        Self { x: x.to_vec(), y: y.to_vec(), w: DenseMatrix::outer(x, y), h_mat: None }
    }

    /// Bilinear-layout vector `(x, y, W)`.
    pub fn to_bilinear_vector(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.y);
        z.extend_from_slice(self.w.as_slice());
        z
    }

    /// `W - xy'`
    pub fn lifting_residual(&self) -> DenseMatrix {
        self.w.sub(&DenseMatrix::outer(&self.x, &self.y))
    }
}

/// The four McCormick rows for `s = p1 * p2`, `p1 in [a1, b1]`, `p2 in [a2, b2]`,
/// with `s`, `p1`, `p2` given as linear expressions.
pub fn mccormick_rows_expr(
    s: &LinExpr,
    p1: &LinExpr,
    p2: &LinExpr,
    (a1, b1): (f64, f64),
    (a2, b2): (f64, f64),
) -> Result<[LinearRow; 4], RelaxationError> {
    for (lo, hi) in [(a1, b1), (a2, b2)] {
        if !(lo <= hi) {
            return Err(RelaxationError::BoundInverted { lo, hi });
        }
    }
    let combo = |c1: f64, c2: f64| -> LinExpr {
        let mut e = s.clone();
        e.extend(p1.iter().map(|&(i, v)| (i, -c1 * v)));
        e.extend(p2.iter().map(|&(i, v)| (i, -c2 * v)));
        e
    };
    Ok([
        LinearRow::le(combo(b2, a1), -a1 * b2).normalized(),
        LinearRow::le(combo(a2, b1), -a2 * b1).normalized(),
        LinearRow::ge(combo(a2, a1), -a1 * a2).normalized(),
        LinearRow::ge(combo(b2, b1), -b1 * b2).normalized(),
    ])
}

/// McCormick rows for the single product `z[prod] = z[f1] * z[f2]`.
pub fn mccormick_rows(
    prod: usize,
    f1: usize,
    f2: usize,
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
) -> Result<[LinearRow; 4], RelaxationError> {
    mccormick_rows_expr(&vec![(prod, 1.0)], &vec![(f1, 1.0)], &vec![(f2, 1.0)], (a1, b1), (a2, b2))
}

fn boxed_model(inst: &BilinearInstance, map: &VariableMap) -> QuadraticModel {
    let mut model = QuadraticModel::new(map.num_vars());
    let (lo, hi) = inst.h_box();
    model.var_lo[..lo.len()].copy_from_slice(&lo);
    model.var_hi[..hi.len()].copy_from_slice(&hi);
    model
}

/// The W-McCormick rows of B.Mc, in `(i, j)` row-major order.
pub fn bmc_mccormick_rows(inst: &BilinearInstance, map: &VariableMap) -> Result<Vec<LinearRow>, RelaxationError> {
    let mut rows = Vec::with_capacity(4 * inst.n() * inst.m());
    for i in 0..inst.n() {
        for j in 0..inst.m() {
            rows.extend(mccormick_rows(
                map.w(i, j),
                map.x(i),
                map.y(j),
                inst.ax[i],
                inst.bx[i],
                inst.ay[j],
                inst.by[j],
            )?);
        }
    }
    Ok(rows)
}

/// B.Mc: `min <A, W> + x'Qx + y'Ry` over the W-McCormick rows and the box.
pub fn build_bmc(inst: &BilinearInstance) -> Result<(QuadraticModel, VariableMap), RelaxationError> {
    let v = inst.validate()?;
    if !v.convex {
        return Err(RelaxationError::NotConvex(v.min_eig_q.min(v.min_eig_r)));
    }
    debug_assert!(v.min_eig_q >= -PSD_TOL && v.min_eig_r >= -PSD_TOL);
    let (n, m) = (inst.n(), inst.m());
    let map = VariableMap::bilinear(n, m);
    let mut model = boxed_model(inst, &map);
    for i in 0..n {
        for j in 0..m {
            model.objective_linear[map.w(i, j)] = inst.a[(i, j)];
        }
    }
    model.objective_quadratic.add_block(0, &inst.q, 2.0);
    model.objective_quadratic.add_block(n, &inst.r, 2.0);
    model.rows = bmc_mccormick_rows(inst, &map)?;
    Ok((model, map))
}

/// S.Mc: `min <Gamma, H>` over McCormick rows for every unordered pair of `h`.
pub fn build_smc(inst: &BilinearInstance) -> Result<(QuadraticModel, VariableMap), RelaxationError> {
    inst.validate()?;
    let (n, m) = (inst.n(), inst.m());
    let p = n + m;
    let map = VariableMap::symmetric(n, m);
    let mut model = boxed_model(inst, &map);
    let gamma = inst.gamma();
    let (lo, hi) = inst.h_box();
    for i in 0..p {
        for j in i..p {
            let k = map.hh(i, j);
            model.objective_linear[k] = if i == j { gamma[(i, i)] } else { 2.0 * gamma[(i, j)] };
            model.rows.extend(mccormick_rows(k, map.h(i), map.h(j), lo[i], hi[i], lo[j], hi[j])?);
        }
    }
    Ok((model, map))
}

/// Box bounds of `x` and `y` as explicit rows.
pub fn box_rows(inst: &BilinearInstance, map: &VariableMap) -> Vec<LinearRow> {
    let (lo, hi) = inst.h_box();
    let mut rows = Vec::with_capacity(2 * lo.len());
    for k in 0..lo.len() {
        rows.push(LinearRow::ge(vec![(map.h(k), 1.0)], lo[k]));
        rows.push(LinearRow::le(vec![(map.h(k), 1.0)], hi[k]));
    }
    rows
}

/// Finite bounds on every bilinear-layout variable; `W(i, j)` ranges over the
/// corner products of the `x_i` and `y_j` intervals.
pub fn lifted_bounds(inst: &BilinearInstance, map: &VariableMap) -> (Vec<f64>, Vec<f64>) {
    let (mut lo, mut hi) = inst.h_box();
    for i in 0..inst.n() {
        for j in 0..inst.m() {
            let c = [inst.ax[i] * inst.ay[j], inst.ax[i] * inst.by[j], inst.bx[i] * inst.ay[j], inst.bx[i] * inst.by[j]];
            lo.push(c.iter().copied().fold(f64::INFINITY, f64::min));
            hi.push(c.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
    }
    debug_assert_eq!(lo.len(), map.num_vars());
    (lo, hi)
}

/// `x'Ay + x'Qx + y'Ry`
pub fn true_objective(inst: &BilinearInstance, x: &[f64], y: &[f64]) -> f64 {
    inst.a.bilinear(x, y) + inst.q.bilinear(x, x) + inst.r.bilinear(y, y)
}
