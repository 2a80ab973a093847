//! Problem data for `min x'Ay + x'Qx + y'Ry` over a box, seeded generation
//! and JSON persistence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{sym_eig, DenseMatrix, LinalgError};
use crate::rng::Xoshiro256;

/// Minimum eigenvalue accepted for a PSD quadratic block.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("box inverted for {var}[{index}]: lower {lo} > upper {hi}")]
    BoxInverted { var: &'static str, index: usize, lo: f64, hi: f64 },
    #[error("{0} is not symmetric (asymmetry {1:e})")]
    AsymmetricQ(&'static str, f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Box-constrained bilinear problem with quadratic blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearInstance {
    pub a: DenseMatrix,
    pub q: DenseMatrix,
    pub r: DenseMatrix,
    pub ax: Vec<f64>,
    pub bx: Vec<f64>,
    pub ay: Vec<f64>,
    pub by: Vec<f64>,
}

/// Result of [`BilinearInstance::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub convex: bool,
    pub min_eig_q: f64,
    pub min_eig_r: f64,
}

impl BilinearInstance {
    /// Builds an instance with unit boxes `[-1, 1]`.
    pub fn with_unit_boxes(a: DenseMatrix, q: DenseMatrix, r: DenseMatrix) -> Self {
        let (n, m) = (a.rows(), a.cols());
        Self { a, q, r, ax: vec![-1.0; n], bx: vec![1.0; n], ay: vec![-1.0; m], by: vec![1.0; m] }
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.a.cols()
    }

    /// Box of the stacked vector `h = (x; y)`.
    pub fn h_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.ax.iter().chain(&self.ay).copied().collect();
        let hi = self.bx.iter().chain(&self.by).copied().collect();
        (lo, hi)
    }

    /// Same data with `Q = R = 0`.
    pub fn without_quadratics(&self) -> Self {
        let mut out = self.clone();
        out.q = DenseMatrix::zeros(self.n(), self.n());
        out.r = DenseMatrix::zeros(self.m(), self.m());
        out
    }

    /// `Gamma = [[Q, A/2], [A'/2, R]]`.
    pub fn gamma(&self) -> DenseMatrix {
        let (n, m) = (self.n(), self.m());
        let mut g = DenseMatrix::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = self.q[(i, j)];
            }
            for j in 0..m {
                g[(i, n + j)] = 0.5 * self.a[(i, j)];
                g[(n + j, i)] = 0.5 * self.a[(i, j)];
            }
        }
        for i in 0..m {
            for j in 0..m {
                g[(n + i, n + j)] = self.r[(i, j)];
            }
        }
        g
    }

    fn check_structure(&self) -> Result<(), InstanceError> {
        let (n, m) = (self.n(), self.m());
        if n == 0 || m == 0 {
            return Err(InstanceError::Dimension("n and m must be positive".into()));
        }
        let dims = [
            ("Q", self.q.rows(), self.q.cols(), n),
            ("R", self.r.rows(), self.r.cols(), m),
        ];
        for (name, r, c, want) in dims {
            if r != want || c != want {
                return Err(InstanceError::Dimension(format!("{name} is {r}x{c}, expected {want}x{want}")));
            }
        }
        for (name, v, want) in [("ax", &self.ax, n), ("bx", &self.bx, n), ("ay", &self.ay, m), ("by", &self.by, m)] {
            if v.len() != want {
                return Err(InstanceError::Dimension(format!("{name} has length {}, expected {want}", v.len())));
            }
        }
        for (name, mat) in [("A", &self.a), ("Q", &self.q), ("R", &self.r)] {
            if !mat.is_finite() {
                return Err(InstanceError::NonFinite(name));
            }
        }
        for (name, v) in [("ax", &self.ax), ("bx", &self.bx), ("ay", &self.ay), ("by", &self.by)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(InstanceError::NonFinite(name));
            }
        }
        for (var, lo, hi) in [("x", &self.ax, &self.bx), ("y", &self.ay, &self.by)] {
            if let Some(i) = (0..lo.len()).find(|&i| lo[i] > hi[i]) {
                return Err(InstanceError::BoxInverted { var, index: i, lo: lo[i], hi: hi[i] });
            }
        }
        for (name, mat) in [("Q", &self.q), ("R", &self.r)] {
            if !mat.is_symmetric(crate::linalg::SYMMETRY_TOL) {
                return Err(InstanceError::AsymmetricQ(name, mat.max_asymmetry()));
            }
        }
        Ok(())
    }

    /// Checks every invariant and computes the convexity flag.
    pub fn validate(&self) -> Result<Validation, InstanceError> {
        self.check_structure()?;
        let min_eig_q = sym_eig(&self.q)?.min_eigenvalue();
        let min_eig_r = sym_eig(&self.r)?.min_eigenvalue();
        Ok(Validation { convex: min_eig_q >= -PSD_TOL && min_eig_r >= -PSD_TOL, min_eig_q, min_eig_r })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&InstanceJson::from(self)).expect("instance serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&InstanceJson::from(self)).expect("instance serializes")
    }

    /// Parses and structurally checks an instance (no convexity requirement).
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let raw: InstanceJson = serde_json::from_str(text).map_err(|e| InstanceError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let inst = raw.into_instance()?;
        inst.check_structure()?;
        Ok(inst)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceJson {
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    ax: Vec<f64>,
    bx: Vec<f64>,
    ay: Vec<f64>,
    by: Vec<f64>,
}

impl From<&BilinearInstance> for InstanceJson {
    fn from(i: &BilinearInstance) -> Self {
        Self {
            n: i.n(),
            m: i.m(),
            a: i.a.to_rows(),
            q: i.q.to_rows(),
            r: i.r.to_rows(),
            ax: i.ax.clone(),
            bx: i.bx.clone(),
            ay: i.ay.clone(),
            by: i.by.clone(),
        }
    }
}

impl InstanceJson {
    fn into_instance(self) -> Result<BilinearInstance, InstanceError> {
        let shaped = |name: &str, rows: Vec<Vec<f64>>, r: usize, c: usize| {
            if rows.len() != r || rows.iter().any(|row| row.len() != c) {
                return Err(InstanceError::Dimension(format!("field \"{name}\" must be {r}x{c}")));
            }
            Ok(DenseMatrix::from_rows(&rows)?).map(|m| if r == 0 { DenseMatrix::zeros(0, c) } else { m })
        };
        let a = shaped("A", self.a, self.n, self.m)?;
        let q = shaped("Q", self.q, self.n, self.n)?;
        let r = shaped("R", self.r, self.m, self.m)?;
        Ok(BilinearInstance { a, q, r, ax: self.ax, bx: self.bx, ay: self.ay, by: self.by })
    }
}

/// Parameters of the random instance design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub m: usize,
    pub density_a: f64,
    pub rank_frac_q: f64,
    pub rank_frac_r: f64,
    pub seed: u64,
}

/// `ceil(frac * count)` computed without being pushed up by rounding noise.
fn ceil_frac(frac: f64, count: usize) -> usize {
    let raw = frac * count as f64;
    let nearest = raw.round();
    if (raw - nearest).abs() <= 1e-9 * raw.abs().max(1.0) {
        nearest as usize
    } else {
        raw.ceil() as usize
    }
}

impl GenParams {
    pub fn nonzeros(&self) -> usize {
        ceil_frac(self.density_a, self.n * self.m)
    }

    pub fn rank_q(&self) -> usize {
        ceil_frac(self.rank_frac_q, self.n)
    }

    pub fn rank_r(&self) -> usize {
        ceil_frac(self.rank_frac_r, self.m)
    }

    fn check(&self) -> Result<(), InstanceError> {
        if self.n == 0 || self.m == 0 {
            return Err(InstanceError::InvalidParams("n and m must be positive".into()));
        }
        for (name, f) in [("density_a", self.density_a), ("rank_frac_q", self.rank_frac_q), ("rank_frac_r", self.rank_frac_r)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(InstanceError::InvalidParams(format!("{name}={f} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Draws an instance. Draw order: nonzero positions of `A` (partial
/// Fisher-Yates over row-major cells), their values in ascending position
/// order, then `F_Q` and `F_R` row-major; all values uniform on `[-1, 1]`.
pub fn generate(params: &GenParams) -> Result<BilinearInstance, InstanceError> {
    params.check()?;
    let (n, m) = (params.n, params.m);
    let mut rng = Xoshiro256::seed_from_u64(params.seed);

    let cells = n * m;
    let k = params.nonzeros();
    let mut perm: Vec<usize> = (0..cells).collect();
    for i in 0..k {
        let j = i + rng.below((cells - i) as u64) as usize;
        perm.swap(i, j);
    }
    let mut chosen = perm[..k].to_vec();
    chosen.sort_unstable();
    let mut a = DenseMatrix::zeros(n, m);
    for cell in chosen {
        let mut v = rng.uniform(-1.0, 1.0);
        while v == 0.0 {
            v = rng.uniform(-1.0, 1.0);
        }
        a[(cell / m, cell % m)] = v;
    }

    let q = gram(&mut rng, n, params.rank_q());
    let r = gram(&mut rng, m, params.rank_r());
    Ok(BilinearInstance::with_unit_boxes(a, q, r))
}

fn gram(rng: &mut Xoshiro256, dim: usize, rank: usize) -> DenseMatrix {
    let data = (0..dim * rank).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let f = DenseMatrix::from_row_major(dim, rank, data);
    let mut g = f.matmul(&f.transpose()).expect("shapes agree");
    for i in 0..dim {
        for j in i + 1..dim {
            let v = g[(i, j)];
            g[(j, i)] = v;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, m: usize, density: f64, rank: f64, seed: u64) -> GenParams {
        GenParams { n, m, density_a: density, rank_frac_q: rank, rank_frac_r: rank, seed }
    }

    #[test]
    fn full_rank_dense_instance() {
        let inst = generate(&params(20, 4, 1.0, 1.0, 1)).unwrap();
        assert_eq!(inst.a.count_nonzeros(), 80);
        let v = inst.validate().unwrap();
        assert!(v.convex);
        let eq = sym_eig(&inst.q).unwrap();
        let rank_q = eq.eigenvalues.iter().filter(|&&l| l > 1e-8).count();
        let er = sym_eig(&inst.r).unwrap();
        let rank_r = er.eigenvalues.iter().filter(|&&l| l > 1e-8).count();
        assert_eq!((rank_q, rank_r), (20, 4));
    }

    #[test]
    fn half_density_count() {
        let inst = generate(&params(2, 2, 0.5, 1.0, 9)).unwrap();
        assert_eq!(inst.a.count_nonzeros(), 2);
    }

    #[test]
    fn low_rank_factor() {
        let p = params(20, 8, 0.5, 0.25, 4);
        assert_eq!((p.rank_q(), p.rank_r()), (5, 2));
        let inst = generate(&p).unwrap();
        let eq = sym_eig(&inst.q).unwrap();
        assert_eq!(eq.eigenvalues.iter().filter(|&&l| l > 1e-8).count(), 5);
        assert!(eq.min_eigenvalue() >= -1e-8);
    }

    #[test]
    fn same_seed_same_bytes() {
        let p = params(6, 3, 0.5, 0.75, 77);
        assert_eq!(generate(&p).unwrap().to_json(), generate(&p).unwrap().to_json());
        let other = GenParams { seed: 78, ..p };
        assert_ne!(generate(&p).unwrap().to_json(), generate(&other).unwrap().to_json());
    }

    #[test]
    fn invalid_params() {
        assert!(matches!(generate(&params(0, 2, 0.5, 1.0, 1)), Err(InstanceError::InvalidParams(_))));
        assert!(matches!(generate(&params(2, 2, 0.0, 1.0, 1)), Err(InstanceError::InvalidParams(_))));
        assert!(matches!(generate(&params(2, 2, 0.5, 1.5, 1)), Err(InstanceError::InvalidParams(_))));
    }

    #[test]
    fn nonconvex_flag() {
        let mut inst = generate(&params(3, 2, 1.0, 1.0, 2)).unwrap();
        inst.q = DenseMatrix::from_diag(&[1.0, -1.0, 2.0]);
        assert!(!inst.validate().unwrap().convex);
    }

    #[test]
    fn inverted_box() {
        let inst = BilinearInstance {
            a: DenseMatrix::zeros(1, 1),
            q: DenseMatrix::zeros(1, 1),
            r: DenseMatrix::zeros(1, 1),
            ax: vec![1.0],
            bx: vec![0.0],
            ay: vec![0.0],
            by: vec![1.0],
        };
        assert!(matches!(inst.validate(), Err(InstanceError::BoxInverted { var: "x", index: 0, .. })));
    }

    #[test]
    fn asymmetric_q() {
        let mut inst = generate(&params(2, 2, 1.0, 1.0, 3)).unwrap();
        inst.q[(0, 1)] += 0.5;
        assert!(matches!(inst.validate(), Err(InstanceError::AsymmetricQ("Q", _))));
    }

    #[test]
    fn json_round_trip() {
        let inst = generate(&params(5, 4, 0.5, 0.5, 12)).unwrap();
        let back = BilinearInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn json_missing_field_names_it() {
        let text = r#"{"n":1,"m":1,"Q":[[0]],"R":[[0]],"ax":[-1],"bx":[1],"ay":[-1],"by":[1]}"#;
        match BilinearInstance::from_json(text) {
            Err(InstanceError::Parse { message, .. }) => assert!(message.contains("`A`"), "{message}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn json_minimal_instance() {
        let text = r#"{"n":1,"m":1,"A":[[1.5]],"Q":[[0]],"R":[[2]],"ax":[-1],"bx":[1],"ay":[0],"by":[2]}"#;
        let inst = BilinearInstance::from_json(text).unwrap();
        assert_eq!(inst.a[(0, 0)], 1.5);
        assert!(inst.validate().unwrap().convex);
    }

    #[test]
    fn json_shape_error() {
        let text = r#"{"n":2,"m":1,"A":[[1.5]],"Q":[[0]],"R":[[2]],"ax":[-1],"bx":[1],"ay":[0],"by":[2]}"#;
        assert!(matches!(BilinearInstance::from_json(text), Err(InstanceError::Dimension(_))));
    }
}
