//! Separable (`q1`, `q2`, `r`) and product (`p1`, `p2`, `s`) forms of a
//! singular-pair inequality, with the rows derived from them.

use super::CutError;
use crate::instances::BilinearInstance;
use crate::linalg::interval_dot;
use crate::relaxations::{mccormick_rows_expr, LinExpr, VariableMap};
use crate::solver::LinearRow;

/// `sum_k c_k * e_k`, merged and without zeros.
pub(crate) fn combine(terms: &[(f64, &LinExpr)]) -> LinExpr {
    let mut out: LinExpr = terms.iter().flat_map(|(c, e)| e.iter().map(move |&(i, v)| (i, c * v))).collect();
    out.sort_by_key(|t| t.0);
    let mut merged: LinExpr = Vec::with_capacity(out.len());
    for (i, v) in out {
        match merged.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => merged.push((i, v)),
        }
    }
    merged.retain(|t| t.1 != 0.0);
    merged
}

pub(crate) fn eval(expr: &LinExpr, z: &[f64]) -> f64 {
    expr.iter().map(|&(i, v)| v * z[i]).sum()
}

/// `u'x`, `v'y` and `<uv', W>` over the bilinear layout.
fn product_exprs(u: &[f64], v: &[f64], map: &VariableMap) -> (LinExpr, LinExpr, LinExpr) {
    let p1 = u.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, c)| (map.x(i), *c)).collect();
    let p2 = v.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (map.y(j), *c)).collect();
    let mut s = Vec::new();
    for (i, &ui) in u.iter().enumerate() {
        if ui == 0.0 {
            continue;
        }
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                s.push((map.w(i, j), ui * vj));
            }
        }
    }
    (p1, p2, s)
}

fn check_dims(u: &[f64], v: &[f64], inst: &BilinearInstance) -> Result<VariableMap, CutError> {
    if u.len() != inst.n() || v.len() != inst.m() {
        return Err(CutError::Dimension(format!(
            "u has {}, v has {}; instance is {}x{}",
            u.len(),
            v.len(),
            inst.n(),
            inst.m()
        )));
    }
    Ok(VariableMap::bilinear(inst.n(), inst.m()))
}

/// `q1 = (u'x + v'y)/2`, `q2 = (u'x - v'y)/2`, `r = <uv', W>` with box bounds on `q1`, `q2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableForm {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub q1_bounds: (f64, f64),
    pub q2_bounds: (f64, f64),
    q1: LinExpr,
    q2: LinExpr,
    r: LinExpr,
}

pub fn separable_form(u: &[f64], v: &[f64], inst: &BilinearInstance) -> Result<SeparableForm, CutError> {
    let map = check_dims(u, v, inst)?;
    let (p1, p2, r) = product_exprs(u, v, &map);
    let (lo, hi) = inst.h_box();
    let c1: Vec<f64> = u.iter().map(|a| 0.5 * a).chain(v.iter().map(|b| 0.5 * b)).collect();
    let c2: Vec<f64> = u.iter().map(|a| 0.5 * a).chain(v.iter().map(|b| -0.5 * b)).collect();
    Ok(SeparableForm {
        u: u.to_vec(),
        v: v.to_vec(),
        q1_bounds: interval_dot(&c1, &lo, &hi)?,
        q2_bounds: interval_dot(&c2, &lo, &hi)?,
        q1: combine(&[(0.5, &p1), (0.5, &p2)]),
        q2: combine(&[(0.5, &p1), (-0.5, &p2)]),
        r,
    })
}

impl SeparableForm {
    pub fn q1(&self) -> &LinExpr {
        &self.q1
    }

    pub fn q2(&self) -> &LinExpr {
        &self.q2
    }

    pub fn r(&self) -> &LinExpr {
        &self.r
    }

    /// `(q1, q2, r)` at a bilinear-layout point.
    pub fn evaluate(&self, z: &[f64]) -> (f64, f64, f64) {
        (eval(&self.q1, z), eval(&self.q2, z), eval(&self.r, z))
    }

    /// `r + q2^2 <= (l + u) q1 - l u` with the secant of `q1^2` on `[l, u]`.
    pub fn sec1_on(&self, (l, u): (f64, f64)) -> QuadraticInequality {
        QuadraticInequality { linear: combine(&[(1.0, &self.r), (-(l + u), &self.q1)]), square: self.q2.clone(), rhs: -l * u }
    }

    /// `-r + q1^2 <= (l + u) q2 - l u` with the secant of `q2^2` on `[l, u]`.
    pub fn sec2_on(&self, (l, u): (f64, f64)) -> QuadraticInequality {
        QuadraticInequality { linear: combine(&[(-1.0, &self.r), (-(l + u), &self.q2)]), square: self.q1.clone(), rhs: -l * u }
    }
}

/// `p1 = u'x`, `p2 = v'y`, `s = <uv', W>` with box bounds on `p1`, `p2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductForm {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p1_bounds: (f64, f64),
    pub p2_bounds: (f64, f64),
    p1: LinExpr,
    p2: LinExpr,
    s: LinExpr,
}

pub fn product_form(u: &[f64], v: &[f64], inst: &BilinearInstance) -> Result<ProductForm, CutError> {
    let map = check_dims(u, v, inst)?;
    let (p1, p2, s) = product_exprs(u, v, &map);
    Ok(ProductForm {
        u: u.to_vec(),
        v: v.to_vec(),
        p1_bounds: interval_dot(u, &inst.ax, &inst.bx)?,
        p2_bounds: interval_dot(v, &inst.ay, &inst.by)?,
        p1,
        p2,
        s,
    })
}

impl ProductForm {
    pub fn p1(&self) -> &LinExpr {
        &self.p1
    }

    pub fn p2(&self) -> &LinExpr {
        &self.p2
    }

    pub fn s(&self) -> &LinExpr {
        &self.s
    }

    /// `(p1, p2, s)` at a bilinear-layout point.
    pub fn evaluate(&self, z: &[f64]) -> (f64, f64, f64) {
        (eval(&self.p1, z), eval(&self.p2, z), eval(&self.s, z))
    }
}

/// `linear(z) + square(z)^2 <= rhs` with both parts linear.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticInequality {
    pub linear: LinExpr,
    pub square: LinExpr,
    pub rhs: f64,
}

impl QuadraticInequality {
    pub fn lhs(&self, z: &[f64]) -> f64 {
        let g = eval(&self.square, z);
        eval(&self.linear, z) + g * g
    }

    pub fn violation(&self, z: &[f64]) -> f64 {
        (self.lhs(z) - self.rhs).max(0.0)
    }
}

/// `sec1` and `sec2` on the full `q1`, `q2` ranges.
pub fn secant_inequalities(form: &SeparableForm) -> [QuadraticInequality; 2] {
    [form.sec1_on(form.q1_bounds), form.sec2_on(form.q2_bounds)]
}

/// Replaces `g^2` by its tangent `2 g(z_hat) g - g(z_hat)^2`; the result is
/// implied by the quadratic inequality.
pub fn tangent_linearize(ineq: &QuadraticInequality, z_hat: &[f64]) -> LinearRow {
    let g0 = eval(&ineq.square, z_hat);
    let coeffs = combine(&[(1.0, &ineq.linear), (2.0 * g0, &ineq.square)]);
    LinearRow::le(coeffs, ineq.rhs + g0 * g0)
}

/// Tangent-linearized `sec1`/`sec2` for `(u, v) = (+-e_i, +-e_j)` over all
/// `(i, j)`: `8nm` rows, in `(i, j, sign u, sign v, sec1/sec2)` order.
///
/// `(e_i, e_j)` and `(-e_i, -e_j)` produce identical rows, as do the two
/// mixed-sign pairs; callers that care can drop the duplicates.
pub fn unit_vector_rows(inst: &BilinearInstance, z_hat: &[f64]) -> Vec<LinearRow> {
    let (n, m) = (inst.n(), inst.m());
    let map = VariableMap::bilinear(n, m);
    let mut rows = Vec::with_capacity(8 * n * m);
    for i in 0..n {
        for j in 0..m {
            for su in [1.0, -1.0] {
                for sv in [1.0, -1.0] {
                    let form = unit_form(inst, &map, i, j, su, sv);
                    for q in secant_inequalities(&form) {
                        rows.push(tangent_linearize(&q, z_hat));
                    }
                }
            }
        }
    }
    rows
}

fn unit_form(inst: &BilinearInstance, map: &VariableMap, i: usize, j: usize, su: f64, sv: f64) -> SeparableForm {
    let (xi, yj) = (map.x(i), map.y(j));
    let half = |s: f64, lo: f64, hi: f64| if s > 0.0 { (0.5 * lo, 0.5 * hi) } else { (-0.5 * hi, -0.5 * lo) };
    let (xl, xh) = half(su, inst.ax[i], inst.bx[i]);
    let (yl, yh) = half(sv, inst.ay[j], inst.by[j]);
    let mut u = vec![0.0; inst.n()];
    let mut v = vec![0.0; inst.m()];
    u[i] = su;
    v[j] = sv;
    SeparableForm {
        u,
        v,
        q1_bounds: (xl + yl, xh + yh),
        q2_bounds: (xl - yh, xh - yl),
        q1: vec![(xi, 0.5 * su), (yj, 0.5 * sv)],
        q2: vec![(xi, 0.5 * su), (yj, -0.5 * sv)],
        r: vec![(map.w(i, j), su * sv)],
    }
}

/// McCormick rows on `s = p1 p2` over the full `p` ranges.
pub fn extended_mccormick_rows(form: &ProductForm) -> Result<[LinearRow; 4], CutError> {
    Ok(mccormick_rows_expr(&form.s, &form.p1, &form.p2, form.p1_bounds, form.p2_bounds)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GenParams};
    use crate::linalg::{norm2, DenseMatrix};
    use crate::rng::Xoshiro256;
    use proptest::prelude::*;

    fn inst(n: usize, m: usize, seed: u64) -> BilinearInstance {
        let mut i = generate(&GenParams { n, m, density_a: 1.0, rank_frac_q: 0.5, rank_frac_r: 0.5, seed }).unwrap();
        // asymmetric, non-unit boxes exercise the bound arithmetic
        for k in 0..n {
            i.ax[k] = -0.5 - 0.1 * k as f64;
            i.bx[k] = 1.0 + 0.2 * k as f64;
        }
        if m > 1 {
            i.ay[1] = 0.25;
        }
        i
    }

    fn random_unit(rng: &mut Xoshiro256, k: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
        let nv = norm2(&v);
        v.into_iter().map(|a| a / nv).collect()
    }

    fn sample_feasible(rng: &mut Xoshiro256, inst: &BilinearInstance) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..inst.n()).map(|i| rng.uniform(inst.ax[i], inst.bx[i])).collect();
        let y: Vec<f64> = (0..inst.m()).map(|j| rng.uniform(inst.ay[j], inst.by[j])).collect();
        let z = VariableMap::bilinear(inst.n(), inst.m()).lift(&x, &y);
        (x, y, z)
    }

    fn unit_box(n: usize, m: usize) -> BilinearInstance {
        BilinearInstance::with_unit_boxes(DenseMatrix::zeros(n, m), DenseMatrix::zeros(n, n), DenseMatrix::zeros(m, m))
    }

    #[test]
    fn unit_pair_bounds() {
        let inst = unit_box(2, 2);
        let f = separable_form(&[1.0, 0.0], &[1.0, 0.0], &inst).unwrap();
        assert_eq!(f.q1_bounds, (-1.0, 1.0));
        assert_eq!(f.q2_bounds, (-1.0, 1.0));
        // secant of q1^2 on [-1, 1] is the constant 1
        let [s1, _] = secant_inequalities(&f);
        assert_eq!(s1.rhs, 1.0);
        assert_eq!(s1.linear, f.r().clone());
    }

    #[test]
    fn separable_identity_values() {
        let inst = unit_box(1, 1);
        let f = separable_form(&[1.0], &[1.0], &inst).unwrap();
        // u'x = 2, v'y = 1 (outside the box, identity is algebraic)
        let z = [2.0, 1.0, 0.0];
        let (q1, q2, _) = f.evaluate(&z);
        assert_eq!((q1, q2), (1.5, 0.5));
        assert_eq!(q1 * q1 - q2 * q2, 2.0);
    }

    #[test]
    fn zero_width_box() {
        let mut inst = unit_box(2, 1);
        inst.ax[0] = 0.3;
        inst.bx[0] = 0.3;
        inst.ax[1] = 0.0;
        inst.bx[1] = 0.0;
        inst.ay[0] = 0.5;
        inst.by[0] = 0.5;
        let f = separable_form(&[0.6, 0.8], &[1.0], &inst).unwrap();
        let q1 = 0.5 * (0.6 * 0.3 + 0.5);
        let q2 = 0.5 * (0.6 * 0.3 - 0.5);
        assert!((f.q1_bounds.0 - q1).abs() < 1e-15 && (f.q1_bounds.1 - q1).abs() < 1e-15);
        assert!((f.q2_bounds.0 - q2).abs() < 1e-15 && (f.q2_bounds.1 - q2).abs() < 1e-15);
    }

    #[test]
    fn secant_on_nonsymmetric_interval() {
        let inst = unit_box(1, 1);
        let f = separable_form(&[1.0], &[1.0], &inst).unwrap();
        let s = f.sec1_on((0.0, 2.0));
        // at q1 = 1 the secant is 2 >= 1 = q1^2
        let z = [1.0, 1.0, 0.0];
        assert_eq!(eval(&s.linear, &z) - eval(f.r(), &z), -2.0);
        assert_eq!(s.rhs, 0.0);
    }

    #[test]
    fn tangent_examples() {
        let q = QuadraticInequality { linear: vec![(0, 1.0)], square: vec![(1, 1.0)], rhs: 3.0 };
        let at_zero = tangent_linearize(&q, &[0.0, 0.0]);
        assert_eq!(at_zero.coeffs, vec![(0, 1.0)]);
        assert_eq!(at_zero.rhs, 3.0);
        let at_one = tangent_linearize(&q, &[0.0, 1.0]);
        assert_eq!(at_one.coeffs, vec![(0, 1.0), (1, 2.0)]);
        assert_eq!(at_one.rhs, 4.0);
        // tangency at g = 1
        assert_eq!(at_one.activity(&[0.5, 1.0]) - at_one.rhs, q.lhs(&[0.5, 1.0]) - q.rhs);
    }

    #[test]
    fn unit_vector_row_counts() {
        assert_eq!(unit_vector_rows(&unit_box(1, 1), &[0.0; 3]).len(), 8);
        let i = unit_box(20, 4);
        assert_eq!(unit_vector_rows(&i, &vec![0.1; VariableMap::bilinear(20, 4).num_vars()]).len(), 640);
    }

    #[test]
    fn unit_form_matches_general_constructor() {
        let inst = inst(3, 2, 4);
        let map = VariableMap::bilinear(3, 2);
        for su in [1.0, -1.0] {
            for sv in [1.0, -1.0] {
                let fast = unit_form(&inst, &map, 2, 1, su, sv);
                let mut u = vec![0.0; 3];
                let mut v = vec![0.0; 2];
                u[2] = su;
                v[1] = sv;
                let slow = separable_form(&u, &v, &inst).unwrap();
                assert_eq!(fast.q1_bounds, slow.q1_bounds);
                assert_eq!(fast.q2_bounds, slow.q2_bounds);
                assert_eq!(fast.r, slow.r);
                assert_eq!(combine(&[(1.0, &fast.q1)]), slow.q1);
                assert_eq!(combine(&[(1.0, &fast.q2)]), slow.q2);
            }
        }
    }

    #[test]
    fn unit_vector_rows_are_sound() {
        let inst = inst(3, 3, 8);
        let mut rng = Xoshiro256::seed_from_u64(1);
        let n = VariableMap::bilinear(3, 3).num_vars();
        for _ in 0..20 {
            let z_hat: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let rows = unit_vector_rows(&inst, &z_hat);
            for _ in 0..200 {
                let (_, _, z) = sample_feasible(&mut rng, &inst);
                assert!(rows.iter().all(|r| r.violation(&z) <= 1e-12));
            }
        }
    }

    #[test]
    fn extended_mccormick_reduces_to_plain() {
        let inst = inst(2, 2, 1);
        let map = VariableMap::bilinear(2, 2);
        let f = product_form(&[1.0, 0.0], &[1.0, 0.0], &inst).unwrap();
        let ext = extended_mccormick_rows(&f).unwrap();
        let plain = crate::relaxations::mccormick_rows(
            map.w(0, 0),
            map.x(0),
            map.y(0),
            inst.ax[0],
            inst.bx[0],
            inst.ay[0],
            inst.by[0],
        )
        .unwrap();
        assert_eq!(ext, plain);
    }

    #[test]
    fn extended_mccormick_corner_tightness() {
        let inst = inst(3, 2, 2);
        let mut rng = Xoshiro256::seed_from_u64(5);
        let u = random_unit(&mut rng, 3);
        let v = random_unit(&mut rng, 2);
        let f = product_form(&u, &v, &inst).unwrap();
        // the box corner maximizing u'x and v'y attains (b1, b2)
        let x: Vec<f64> = (0..3).map(|i| if u[i] >= 0.0 { inst.bx[i] } else { inst.ax[i] }).collect();
        let y: Vec<f64> = (0..2).map(|j| if v[j] >= 0.0 { inst.by[j] } else { inst.ay[j] }).collect();
        let z = VariableMap::bilinear(3, 2).lift(&x, &y);
        let rows = extended_mccormick_rows(&f).unwrap();
        assert!((rows[3].activity(&z) - rows[3].rhs).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn forms_are_sound(seed in any::<u64>()) {
            let inst = inst(4, 3, seed % 17);
            let mut rng = Xoshiro256::seed_from_u64(seed);
            let u = random_unit(&mut rng, 4);
            let v = random_unit(&mut rng, 3);
            let sf = separable_form(&u, &v, &inst).unwrap();
            let pf = product_form(&u, &v, &inst).unwrap();
            let secs = secant_inequalities(&sf);
            let ext = extended_mccormick_rows(&pf).unwrap();
            let n = VariableMap::bilinear(4, 3).num_vars();
            let z_hat: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let tangents: Vec<LinearRow> = secs.iter().map(|q| tangent_linearize(q, &z_hat)).collect();
            for _ in 0..100 {
                let (x, y, z) = sample_feasible(&mut rng, &inst);
                let (q1, q2, r) = sf.evaluate(&z);
                let (p1, p2, s) = pf.evaluate(&z);
                prop_assert!(sf.q1_bounds.0 - 1e-12 <= q1 && q1 <= sf.q1_bounds.1 + 1e-12);
                prop_assert!(sf.q2_bounds.0 - 1e-12 <= q2 && q2 <= sf.q2_bounds.1 + 1e-12);
                prop_assert!(pf.p1_bounds.0 - 1e-12 <= p1 && p1 <= pf.p1_bounds.1 + 1e-12);
                prop_assert!(pf.p2_bounds.0 - 1e-12 <= p2 && p2 <= pf.p2_bounds.1 + 1e-12);
                prop_assert!((r - s).abs() < 1e-12);
                prop_assert!((s - p1 * p2).abs() < 1e-12);
                let _ = (x, y);
                for q in &secs {
                    prop_assert!(q.violation(&z) <= 1e-12);
                }
                for t in tangents.iter().chain(&ext) {
                    prop_assert!(t.violation(&z) <= 1e-12);
                }
            }
        }

        #[test]
        fn separable_identity(seed in any::<u64>()) {
            // r - q1^2 + q2^2 = <uv', W> - (u'x)(v'y) for arbitrary (x, y, W)
            let inst = inst(3, 4, 1);
            let mut rng = Xoshiro256::seed_from_u64(seed);
            let u = random_unit(&mut rng, 3);
            let v = random_unit(&mut rng, 4);
            let f = separable_form(&u, &v, &inst).unwrap();
            let z: Vec<f64> = (0..VariableMap::bilinear(3, 4).num_vars()).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let (q1, q2, r) = f.evaluate(&z);
            let x = &z[..3];
            let y = &z[3..7];
            let w = DenseMatrix::from_row_major(3, 4, z[7..].to_vec());
            let ux: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
            let vy: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
            prop_assert!(((r - q1 * q1 + q2 * q2) - (w.bilinear(&u, &v) - ux * vy)).abs() <= 1e-12);
        }
    }
}
