//! System model and positive-semidefinite matrix utilities.
//!
//! The linear system under intermittent observations is
//!
//! ```text
//!     x_{t+1} = A x_t + w_t,        w_t ~ N(0, Q)
//!     y_t     = C x_t + v_t,        v_t ~ N(0, R)
//! ```
//!
//! with `A` an `n x n` real matrix, `C` an `m x n` observation matrix,
//! `Q >= 0` the process noise covariance and `R > 0` the measurement noise
//! covariance. Covariance matrices live on the cone of symmetric positive
//! semidefinite matrices ordered by the Loewner partial order `X <= Y` iff
//! `Y - X` is positive semidefinite.
//!
//! Structural hypotheses are checked with PBH rank tests:
//! `(A, C)` is detectable iff `[A - lambda I; C]` has full column rank for
//! every eigenvalue with `|lambda| >= 1`, and `(A, Q^{1/2})` is stabilizable
//! iff `[A - lambda I, Q^{1/2}]` has full row rank for the same eigenvalues.

use nalgebra::{Complex, DMatrix};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, RreError};

/// Default relative tolerance for positive-semidefiniteness checks:
/// the smallest eigenvalue may undershoot zero by `tol * max(1, |X|_2)`.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

/// Default relative rank tolerance for the PBH tests: a stacked matrix
/// counts as full rank when `sigma_min > tol * sigma_max`.
pub const DEFAULT_PBH_TOL: f64 = 1e-8;

/// Eigenvalues with `|lambda| >= 1 - UNIT_CIRCLE_MARGIN` are treated as
/// unstable by the PBH tests, so marginally stable modes are not skipped
/// through rounding.
pub const UNIT_CIRCLE_MARGIN: f64 = 1e-10;

/// Symmetric real matrix. Symmetry is enforced by construction: every
/// constructor stores `(M + M^T) / 2`, so downstream spectral computations
/// may rely on exact symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Symmetrizes and wraps a square matrix with finite entries.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(RreError::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(RreError::NonFinite(
                "matrix entries must be finite".into(),
            ));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymMatrix { m: sym })
    }

    /// Builds from nested rows, e.g. parsed JSON `[[1.0, 0.0], [0.0, 1.0]]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        SymMatrix::new(dmatrix_from_rows(rows)?)
    }

    /// 1x1 matrix holding `x`.
    pub fn scalar(x: f64) -> Result<Self> {
        SymMatrix::new(DMatrix::from_element(1, 1, x))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.m
    }

    /// Entry accessor; panics out of range like indexing a `DMatrix`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Value of a 1x1 matrix.
    pub fn as_scalar(&self) -> Result<f64> {
        if self.dim() != 1 {
            return Err(RreError::DimensionMismatch(format!(
                "expected a 1x1 matrix, got {0}x{0}",
                self.dim()
            )));
        }
        Ok(self.m[(0, 0)])
    }

    /// Eigenvalues in ascending order (real, by symmetry).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Largest eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues().last().unwrap()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Spectral norm; equals the largest absolute eigenvalue by symmetry.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, e| acc.max(e.abs()))
    }

    /// Positive semidefinite up to a relative tolerance: the smallest
    /// eigenvalue may undershoot zero by `tol * max(1, |X|_2)`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol * self.spectral_norm().max(1.0)
    }

    /// Symmetric PSD square root via eigendecomposition, clamping small
    /// negative eigenvalues to zero. Never uses a Cholesky factorization, so
    /// singular and slightly indefinite inputs are handled gracefully.
    pub fn sqrt_psd(&self) -> SymMatrix {
        let eig = self.m.clone().symmetric_eigen();
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let u = &eig.eigenvectors;
        let m = u * DMatrix::from_diagonal(&sqrt_vals) * u.transpose();
        SymMatrix { m: (&m + m.transpose()) * 0.5 }
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        rows_from_dmatrix(&self.m).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SymMatrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Loewner partial order: `x <= y` iff `y - x` is positive semidefinite up to
/// the relative tolerance `tol` (see [`SymMatrix::is_psd`]).
pub fn loewner_leq(x: &SymMatrix, y: &SymMatrix, tol: f64) -> Result<bool> {
    if x.dim() != y.dim() {
        return Err(RreError::DimensionMismatch(format!(
            "Loewner comparison of {}x{0} with {}x{1}",
            x.dim(),
            y.dim()
        )));
    }
    let diff = SymMatrix {
        m: y.as_dmatrix() - x.as_dmatrix(),
    };
    Ok(diff.is_psd(tol))
}

/// System matrices `(A, C, Q, R)` with validated shapes and definiteness:
/// `Q` must be positive semidefinite and `R` strictly positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    q: SymMatrix,
    r: SymMatrix,
}

impl SystemModel {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, q: SymMatrix, r: SymMatrix) -> Result<Self> {
        let mut errors = Vec::new();
        let n = a.nrows();
        let m = c.nrows();
        if !a.is_square() {
            errors.push(format!("A must be square, got {}x{}", a.nrows(), a.ncols()));
        }
        if c.ncols() != n {
            errors.push(format!(
                "C must have {} columns to match A, got {}",
                n,
                c.ncols()
            ));
        }
        if q.dim() != n {
            errors.push(format!("Q must be {n}x{n} to match A, got {0}x{0}", q.dim()));
        }
        if r.dim() != m {
            errors.push(format!(
                "R must be {m}x{m} to match C's row count, got {0}x{0}",
                r.dim()
            ));
        }
        if a.iter().chain(c.iter()).any(|x| !x.is_finite()) {
            errors.push("A and C entries must be finite".into());
        }
        if errors.is_empty() {
            if !q.is_psd(DEFAULT_PSD_TOL) {
                errors.push(format!(
                    "Q must be positive semidefinite (min eigenvalue {:.3e})",
                    q.min_eigenvalue()
                ));
            }
            let r_floor = DEFAULT_PSD_TOL * r.spectral_norm().max(1.0);
            if r.min_eigenvalue() <= r_floor {
                errors.push(format!(
                    "R must be strictly positive definite (min eigenvalue {:.3e})",
                    r.min_eigenvalue()
                ));
            }
        }
        if !errors.is_empty() {
            return Err(RreError::Validation(errors));
        }
        Ok(SystemModel { a, c, q, r })
    }

    /// State dimension `n`.
    pub fn dim_n(&self) -> usize {
        self.a.nrows()
    }

    /// Observation dimension `m`.
    pub fn dim_m(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn q(&self) -> &SymMatrix {
        &self.q
    }

    pub fn r(&self) -> &SymMatrix {
        &self.r
    }

    /// Whether `Q` is strictly positive definite (not just semidefinite).
    /// Several support-theoretic statements require this stronger hypothesis.
    pub fn q_strictly_positive(&self) -> bool {
        self.q.min_eigenvalue() > DEFAULT_PSD_TOL * self.q.spectral_norm().max(1.0)
    }

    /// Parses `{"A": [[..]], "C": [[..]], "Q": [[..]], "R": [[..]]}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawSystem = serde_json::from_str(s).map_err(|e| RreError::Json {
            origin: "system JSON".into(),
            source: e,
        })?;
        raw.try_into()
    }
}

/// On-disk JSON shape of a system model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RawSystem {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
}

impl TryFrom<RawSystem> for SystemModel {
    type Error = RreError;

    fn try_from(raw: RawSystem) -> Result<Self> {
        SystemModel::new(
            dmatrix_from_rows(&raw.a)?,
            dmatrix_from_rows(&raw.c)?,
            SymMatrix::from_rows(&raw.q)?,
            SymMatrix::from_rows(&raw.r)?,
        )
    }
}

impl From<&SystemModel> for RawSystem {
    fn from(m: &SystemModel) -> Self {
        RawSystem {
            a: rows_from_dmatrix(m.a()),
            c: rows_from_dmatrix(m.c()),
            q: rows_from_dmatrix(m.q().as_dmatrix()),
            r: rows_from_dmatrix(m.r().as_dmatrix()),
        }
    }
}

pub(crate) fn dmatrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(RreError::DimensionMismatch(
            "matrix must have at least one row".into(),
        ));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(RreError::DimensionMismatch(
            "matrix rows must be non-empty and of equal length".into(),
        ));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub(crate) fn rows_from_dmatrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Largest eigenvalue modulus of `A` (the spectral radius; computed from the
/// complex spectrum, so rotation-like matrices are handled correctly).
pub fn spectral_abscissa(m: &SystemModel) -> f64 {
    m.a()
        .clone()
        .complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, l| acc.max(l.norm()))
}

/// PBH detectability test for `(A, C)`: every eigenvalue of `A` with
/// `|lambda| >= 1` must keep `[A - lambda I; C]` at full column rank.
pub fn check_detectability(m: &SystemModel, tol: f64) -> bool {
    pbh_columns_full_rank(m.a(), m.c(), tol)
}

/// PBH stabilizability test for `(A, Q^{1/2})`: every eigenvalue of `A` with
/// `|lambda| >= 1` must keep `[A - lambda I, Q^{1/2}]` at full row rank.
/// Equivalent to the column test on the transposed pair.
pub fn check_stabilizability(m: &SystemModel, tol: f64) -> bool {
    let q_sqrt = m.q().sqrt_psd();
    pbh_columns_full_rank(&m.a().transpose(), &q_sqrt.as_dmatrix().transpose(), tol)
}

/// Shared PBH kernel: for each eigenvalue of `a` outside the open unit disk
/// (with margin [`UNIT_CIRCLE_MARGIN`]), stack `[a - lambda I; c]` over the
/// complex numbers and require `sigma_min > tol * sigma_max`.
fn pbh_columns_full_rank(a: &DMatrix<f64>, c: &DMatrix<f64>, tol: f64) -> bool {
    let n = a.nrows();
    let eigs = a.clone().complex_eigenvalues();
    for lambda in eigs.iter() {
        if lambda.norm() < 1.0 - UNIT_CIRCLE_MARGIN {
            continue;
        }
        let mut stacked = DMatrix::<Complex<f64>>::zeros(n + c.nrows(), n);
        for i in 0..n {
            for j in 0..n {
                stacked[(i, j)] = Complex::new(a[(i, j)], 0.0);
            }
            stacked[(i, i)] -= lambda;
        }
        for i in 0..c.nrows() {
            for j in 0..n {
                stacked[(n + i, j)] = Complex::new(c[(i, j)], 0.0);
            }
        }
        let sv = stacked.svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(smin > tol * smax) {
            return false;
        }
    }
    true
}
