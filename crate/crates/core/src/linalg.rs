//! Dense kernels: cyclic Jacobi eigensolver, one-sided Jacobi SVD and
//! interval bounds of linear forms over boxes.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Relative off-diagonal threshold below which a Jacobi rotation is skipped.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 80;

/// Relative asymmetry accepted by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A singular value counts as non-zero when it exceeds
/// `ZERO_SINGULAR_REL * max(1, sigma_1)`.
pub const ZERO_SINGULAR_REL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics when the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    /// Builds a matrix from a list of rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(LinalgError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    /// Outer product `a b'`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let mut m = Self::zeros(a.len(), b.len());
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                m[(i, j)] = ai * bj;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self' v`
    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    /// Bilinear form `a' M b`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.matvec(b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Frobenius inner product `<self, other>`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        dot(&self.data, &other.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn count_nonzeros(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    /// Largest `|m_ij - m_ji|`; infinite for non-square matrices.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.max_asymmetry() <= rel_tol * self.max_abs().max(1.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Plain dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators so the loop vectorizes
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// NaN if any entry is NaN.
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

/// Eigendecomposition `M = Z diag(eigenvalues) Z'` with eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub eigenvalues: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl EigResult {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let mut m = DenseMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            for i in 0..n {
                let zi = self.vectors[(i, k)] * lam;
                for j in 0..n {
                    m[(i, j)] += zi * self.vectors[(j, k)];
                }
            }
        }
        m
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(m: &DenseMatrix) -> Result<EigResult, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "sym_eig needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let asym = m.max_asymmetry();
    if asym > SYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(LinalgError::NonSymmetric(asym));
    }
    let n = m.rows;
    let mut a = m.clone();
    // symmetrize exactly so rotations see a symmetric matrix
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let mut z = DenseMatrix::identity(n);
    let scale = a.frobenius_norm();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let thresh = JACOBI_TOL * (app.abs() * aqq.abs()).sqrt();
                if apq.abs() <= thresh || apq.abs() <= f64::EPSILON * 1e-3 * scale {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let zkp = z[(k, p)];
                    let zkq = z[(k, q)];
                    z[(k, p)] = c * zkp - s * zkq;
                    z[(k, q)] = s * zkp + c * zkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their column order
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = z.column(src);
        fix_sign(&mut col);
        for i in 0..n {
            vectors[(i, dst)] = col[i];
        }
    }
    Ok(EigResult { eigenvalues, vectors })
}

/// Makes the first non-negligible entry non-negative. Returns whether it flipped.
fn fix_sign(v: &mut [f64]) -> bool {
    let tiny = 1e-12 * norm_inf(v);
    if let Some(first) = v.iter().find(|x| x.abs() > tiny) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
            return true;
        }
    }
    false
}

/// Thin SVD `M = U diag(sigma) V'` with `k = min(rows, cols)` columns.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> DenseMatrix {
        let (r, c) = (self.u.rows(), self.v.rows());
        let mut m = DenseMatrix::zeros(r, c);
        for (k, &s) in self.singular_values.iter().enumerate() {
            for i in 0..r {
                let ui = self.u[(i, k)] * s;
                if ui == 0.0 {
                    continue;
                }
                for j in 0..c {
                    m[(i, j)] += ui * self.v[(j, k)];
                }
            }
        }
        m
    }

    /// Number of singular values above the zero threshold.
    pub fn positive_count(&self) -> usize {
        let cut = zero_singular_threshold(&self.singular_values);
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }
}

/// Threshold separating "non-zero" singular values.
pub fn zero_singular_threshold(sigma: &[f64]) -> f64 {
    ZERO_SINGULAR_REL * sigma.first().copied().unwrap_or(0.0).max(1.0)
}

/// Singular value decomposition by one-sided (Hestenes) Jacobi.
pub fn svd(m: &DenseMatrix) -> Result<SvdResult, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if m.rows < m.cols {
        let t = svd(&m.transpose())?;
        return Ok(SvdResult { u: t.v, singular_values: t.singular_values, v: t.u });
    }
    let (r, c) = (m.rows, m.cols);
    // columns of the working matrix and of V, stored contiguously
    let mut cols: Vec<Vec<f64>> = (0..c).map(|j| m.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..c)
        .map(|j| {
            let mut e = vec![0.0; c];
            e[j] = 1.0;
            e
        })
        .collect();
    let scale = m.frobenius_norm();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0
                    || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt()
                    || gamma.abs() <= f64::EPSILON * 1e-3 * scale * scale
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_pair(&mut cols, p, q, cs, sn);
                rotate_pair(&mut vcols, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|col| norm2(col)).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma_max = order.first().map_or(0.0, |&i| norms[i]);
    let negligible = f64::EPSILON * (r as f64) * sigma_max.max(f64::MIN_POSITIVE);

    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(c);
    let mut vout: Vec<Vec<f64>> = Vec::with_capacity(c);
    let mut singular_values = Vec::with_capacity(c);
    let mut basis_next = 0usize;
    for &j in &order {
        let s = norms[j];
        let mut u = if s > negligible {
            cols[j].iter().map(|x| x / s).collect::<Vec<_>>()
        } else {
            next_orthonormal(&ucols, r, &mut basis_next)
        };
        orthogonalize(&mut u, &ucols);
        let mut v = vcols[j].clone();
        if fix_sign(&mut u) {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        ucols.push(u);
        vout.push(v);
        singular_values.push(if s > negligible { s } else { 0.0 });
    }

    let mut u = DenseMatrix::zeros(r, c);
    let mut v = DenseMatrix::zeros(c, c);
    for k in 0..c {
        for i in 0..r {
            u[(i, k)] = ucols[k][i];
        }
        for i in 0..c {
            v[(i, k)] = vout[k][i];
        }
    }
    Ok(SvdResult { u, singular_values, v })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (a, b) = (&mut lo[p], &mut hi[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// One pass of modified Gram-Schmidt against `basis`, then normalization.
fn orthogonalize(u: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let d = dot(u, b);
        for (x, y) in u.iter_mut().zip(b) {
            *x -= d * y;
        }
    }
    let nrm = norm2(u);
    if nrm > 0.0 {
        u.iter_mut().for_each(|x| *x /= nrm);
    }
}

/// Completes an orthonormal set with the next usable standard basis vector.
fn next_orthonormal(basis: &[Vec<f64>], dim: usize, next: &mut usize) -> Vec<f64> {
    while *next < dim {
        let mut e = vec![0.0; dim];
        e[*next] = 1.0;
        *next += 1;
        for b in basis {
            let d = dot(&e, b);
            for (x, y) in e.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        if norm2(&e) > 1e-6 {
            let n = norm2(&e);
            e.iter_mut().for_each(|x| *x /= n);
            return e;
        }
    }
    vec![0.0; dim]
}

/// Range of `c'z` over the box `lo <= z <= hi`.
pub fn interval_dot(c: &[f64], lo: &[f64], hi: &[f64]) -> Result<(f64, f64), LinalgError> {
    if c.len() != lo.len() || c.len() != hi.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "interval_dot: c has {}, lo {}, hi {}",
            c.len(),
            lo.len(),
            hi.len()
        )));
    }
    let mut min = 0.0;
    let mut max = 0.0;
    for ((&ci, &l), &h) in c.iter().zip(lo).zip(hi) {
        if ci == 0.0 {
            continue;
        }
        let (a, b) = (ci * l, ci * h);
        min += a.min(b);
        max += a.max(b);
    }
    Ok((min, max))
}
