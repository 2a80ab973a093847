//! Numerical checks of the two comparison results.
//!
//! Symmetric vs bilinear: with `z = (u; v)/sqrt(2)`, `h = (x; y)` and
//! `H = [[X, W], [W', Y]]`,
//!
//! ```text
//!   <uv', W> - (u'x)(v'y) = (<zz', H> - (z'h)^2) + 1/2 (u'(xx' - X)u + v'(yy' - Y)v)
//! ```
//!
//! so once `X - xx'` and `Y - yy'` are PSD the symmetric inequality implies
//! the bilinear one.
//!
//! Added McCormick vs secant: summing the two upper McCormick rows on
//! `s = p1 p2` gives `addmc`; the secant of `q1^2` over the range implied by
//! the `p` bounds gives `saxmf`.

use super::CutError;
use crate::linalg::{sym_eig, DenseMatrix};

/// Tolerance on `min eig(X - xx')` and `min eig(Y - yy')`.
pub const PSD_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Report {
    /// `<zz', H> - (z'h)^2`
    pub symmetric: f64,
    /// `<uv', W> - (u'x)(v'y)`
    pub bilinear: f64,
    /// `1/2 (u'(xx' - X)u + v'(yy' - Y)v)`, non-positive under the precondition.
    pub chain: f64,
    /// The symmetric inequality holding implies the bilinear one (to 1e-9).
    pub holds: bool,
}

/// Evaluates both inequalities at `(x, y, W, X, Y)` for the pair `(u, v)`.
pub fn verify_theorem1(
    x: &[f64],
    y: &[f64],
    w: &DenseMatrix,
    big_x: &DenseMatrix,
    big_y: &DenseMatrix,
    u: &[f64],
    v: &[f64],
) -> Result<Theorem1Report, CutError> {
    let (n, m) = (x.len(), y.len());
    let dims_ok = w.rows() == n
        && w.cols() == m
        && big_x.rows() == n
        && big_x.cols() == n
        && big_y.rows() == m
        && big_y.cols() == m
        && u.len() == n
        && v.len() == m;
    if !dims_ok {
        return Err(CutError::Dimension("verification inputs have inconsistent sizes".into()));
    }
    let sx = big_x.sub(&DenseMatrix::outer(x, x));
    let sy = big_y.sub(&DenseMatrix::outer(y, y));
    for s in [&sx, &sy] {
        let lam = sym_eig(s)?.min_eigenvalue();
        if lam < -PSD_SLACK {
            return Err(CutError::PsdViolated(lam));
        }
    }

    let p = n + m;
    let mut h_mat = DenseMatrix::zeros(p, p);
    for i in 0..n {
        for j in 0..n {
            h_mat[(i, j)] = big_x[(i, j)];
        }
        for j in 0..m {
            h_mat[(i, n + j)] = w[(i, j)];
            h_mat[(n + j, i)] = w[(i, j)];
        }
    }
    for i in 0..m {
        for j in 0..m {
            h_mat[(n + i, n + j)] = big_y[(i, j)];
        }
    }
    let root_half = std::f64::consts::FRAC_1_SQRT_2;
    let z: Vec<f64> = u.iter().chain(v).map(|a| a * root_half).collect();
    let h: Vec<f64> = x.iter().chain(y).copied().collect();
    let zh: f64 = z.iter().zip(&h).map(|(a, b)| a * b).sum();
    let symmetric = h_mat.bilinear(&z, &z) - zh * zh;

    let ux: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
    let vy: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
    let bilinear = w.bilinear(u, v) - ux * vy;
    let chain = -0.5 * (sx.bilinear(u, u) + sy.bilinear(v, v));
    let holds = symmetric > 0.0 || bilinear <= 1e-9;
    Ok(Theorem1Report { symmetric, bilinear, chain, holds })
}

/// Right side of the summed upper McCormick rows.
pub fn addmc_rhs(a1: f64, b1: f64, a2: f64, b2: f64, p1: f64, p2: f64) -> f64 {
    0.5 * (a2 + b2) * p1 + 0.5 * (a1 + b1) * p2 - 0.5 * (a1 * b2 + a2 * b1)
}

/// Right side of the secant inequality on `q1` with `q1` bounds taken from the `p` bounds.
pub fn saxmf_rhs(a1: f64, b1: f64, a2: f64, b2: f64, p1: f64, p2: f64) -> f64 {
    let s = a1 + b1 + a2 + b2;
    let d = 0.5 * (p1 - p2);
    0.25 * s * (p1 + p2) - 0.25 * (a1 * b2 + a2 * b1 + a1 * b1 + a2 * b2) - d * d
}

/// `saxmf - addmc` at the centre of the `p` box.
pub fn midpoint_gap(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    let (p1, p2) = (0.5 * (a1 + b1), 0.5 * (a2 + b2));
    saxmf_rhs(a1, b1, a2, b2, p1, p2) - addmc_rhs(a1, b1, a2, b2, p1, p2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem2Class {
    /// Both right sides agree on the grid.
    Equivalent,
    /// `saxmf <= addmc` everywhere, strictly somewhere.
    SaxmfDominates,
    /// `addmc <= saxmf` everywhere, strictly somewhere.
    AddmcDominates,
    Incomparable,
}

/// Classifies `addmc` against `saxmf` on the given `(p1, p2)` points.
pub fn compare_addmc_saxmf(a1: f64, b1: f64, a2: f64, b2: f64, grid: &[(f64, f64)]) -> Theorem2Class {
    let scale = 1.0 + [a1, b1, a2, b2].iter().fold(0.0_f64, |m, v| m.max(v.abs())).powi(2);
    let tol = 1e-10 * scale;
    let mut above = false;
    let mut below = false;
    for &(p1, p2) in grid {
        let d = addmc_rhs(a1, b1, a2, b2, p1, p2) - saxmf_rhs(a1, b1, a2, b2, p1, p2);
        above |= d > tol;
        below |= d < -tol;
    }
    match (above, below) {
        (false, false) => Theorem2Class::Equivalent,
        (true, false) => Theorem2Class::SaxmfDominates,
        (false, true) => Theorem2Class::AddmcDominates,
        (true, true) => Theorem2Class::Incomparable,
    }
}

/// `k x k` grid over `[a1, b1] x [a2, b2]`, endpoints included.
pub fn box_grid(a1: f64, b1: f64, a2: f64, b2: f64, k: usize) -> Vec<(f64, f64)> {
    let pts = |a: f64, b: f64| -> Vec<f64> {
        (0..k).map(|i| if k == 1 { 0.5 * (a + b) } else { a + (b - a) * i as f64 / (k - 1) as f64 }).collect()
    };
    let (g1, g2) = (pts(a1, b1), pts(a2, b2));
    g1.iter().flat_map(|&p1| g2.iter().map(move |&p2| (p1, p2))).collect()
}

/// `k` points with `p1 = p2` spanning `[a, b]`.
pub fn diagonal_grid(a: f64, b: f64, k: usize) -> Vec<(f64, f64)> {
    (0..k)
        .map(|i| {
            let p = if k == 1 { 0.5 * (a + b) } else { a + (b - a) * i as f64 / (k - 1) as f64 };
            (p, p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256;

    #[test]
    fn exact_lifting_gives_zero() {
        let x = [0.3, -0.2];
        let y = [0.5];
        let r = verify_theorem1(
            &x,
            &y,
            &DenseMatrix::outer(&x, &y),
            &DenseMatrix::outer(&x, &x),
            &DenseMatrix::outer(&y, &y),
            &[0.6, 0.8],
            &[1.0],
        )
        .unwrap();
        assert!(r.symmetric.abs() < 1e-15 && r.bilinear.abs() < 1e-15 && r.chain.abs() < 1e-15);
        assert!(r.holds);
    }

    #[test]
    fn identity_slack_chain() {
        let x = [0.1, 0.2];
        let y = [-0.3, 0.4];
        let u = [0.6, 0.8];
        let v = [0.8, -0.6];
        let bx = DenseMatrix::outer(&x, &x).add(&DenseMatrix::identity(2));
        let by = DenseMatrix::outer(&y, &y).add(&DenseMatrix::identity(2));
        // pick W so the symmetric inequality is tight
        let mut w = DenseMatrix::outer(&x, &y);
        let shift = 1.0; // u'(X - xx')u/2 + v'(Y - yy')v/2 with unit u, v
        w = w.add(&DenseMatrix::outer(&u, &v).scale(-shift));
        let r = verify_theorem1(&x, &y, &w, &bx, &by, &u, &v).unwrap();
        assert!(r.symmetric.abs() < 1e-12);
        assert!((r.chain + 1.0).abs() < 1e-12);
        assert!((r.bilinear + 1.0).abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn psd_precondition() {
        let x = [0.5];
        let y = [0.5];
        let bad = DenseMatrix::from_diag(&[0.0]);
        let good = DenseMatrix::from_diag(&[0.25]);
        let w = DenseMatrix::from_diag(&[0.25]);
        assert!(matches!(
            verify_theorem1(&x, &y, &w, &bad, &good, &[1.0], &[1.0]),
            Err(CutError::PsdViolated(_))
        ));
    }

    #[test]
    fn symmetric_bounds_reduce_to_secant() {
        // a1 = a2 = 0, b1 = b2 = 1, p1 = p2 = p: both are (a + b) p - ab
        for &(p, _) in &diagonal_grid(0.0, 1.0, 101) {
            let a = addmc_rhs(0.0, 1.0, 0.0, 1.0, p, p);
            let s = saxmf_rhs(0.0, 1.0, 0.0, 1.0, p, p);
            assert!((a - p).abs() < 1e-15 && (s - p).abs() < 1e-15);
        }
        assert_eq!(compare_addmc_saxmf(0.0, 1.0, 0.0, 1.0, &diagonal_grid(0.0, 1.0, 101)), Theorem2Class::Equivalent);
    }

    #[test]
    fn equal_widths_dominate() {
        let mut rng = Xoshiro256::seed_from_u64(6);
        for _ in 0..20 {
            let w = rng.uniform(0.1, 3.0);
            let a1 = rng.uniform(-2.0, 2.0);
            let a2 = rng.uniform(-2.0, 2.0);
            let g = box_grid(a1, a1 + w, a2, a2 + w, 101);
            let c = compare_addmc_saxmf(a1, a1 + w, a2, a2 + w, &g);
            assert!(matches!(c, Theorem2Class::SaxmfDominates | Theorem2Class::Equivalent), "{c:?}");
        }
    }

    #[test]
    fn unequal_widths_midpoint() {
        let (a1, b1, a2, b2) = (0.0, 1.0, 0.0, 3.0);
        let gap = midpoint_gap(a1, b1, a2, b2);
        assert!((gap - 0.25).abs() < 1e-15);
        assert_eq!(compare_addmc_saxmf(a1, b1, a2, b2, &box_grid(a1, b1, a2, b2, 101)), Theorem2Class::Incomparable);
    }

    #[test]
    fn grids() {
        assert_eq!(box_grid(0.0, 1.0, 2.0, 3.0, 3).len(), 9);
        assert_eq!(box_grid(0.0, 1.0, 2.0, 3.0, 3)[4], (0.5, 2.5));
        assert_eq!(diagonal_grid(-1.0, 1.0, 5)[2], (0.0, 0.0));
    }
}
