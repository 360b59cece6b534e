//! The two covariance maps, their switched composition, and the DARE fixed
//! point.
//!
//! ```text
//!     f0(X) = A X A^T + Q                                     (lost sample)
//!     f1(X) = A X A^T + Q - A X C^T (C X C^T + R)^{-1} C X A^T  (received)
//! ```
//!
//! Both maps carry the positive semidefinite cone into itself, are monotone
//! for the Loewner order, and dominate `Q`. `f1` is additionally concave: it
//! is the lower envelope of the affine gain maps
//!
//! ```text
//!     X -> (A + K C) X (A + K C)^T + Q + K R K^T
//! ```
//!
//! over all gains `K`, attained at the Kalman gain of `X`. The fixed point
//! of `f1` is the steady-state prediction covariance `P*` solving the
//! discrete algebraic Riccati equation.
//!
//! A word `(i_1, ..., i_s)` over `{0, 1}` denotes the composition
//! `f_{i_1} ∘ f_{i_2} ∘ ... ∘ f_{i_s}`, i.e. the *last* letter acts first.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Result, RreError};
use crate::model::{check_detectability, check_stabilizability, SymMatrix, SystemModel, DEFAULT_PBH_TOL};

/// Default relative residual at which the DARE iteration stops:
/// `|f1(X) - X|_F <= tol * max(1, |X|_F)`.
pub const DEFAULT_DARE_TOL: f64 = 1e-12;

/// Default iteration cap for [`solve_dare`].
pub const DEFAULT_DARE_MAX_ITER: usize = 10_000;

fn check_state_dim(m: &SystemModel, x: &SymMatrix) -> Result<()> {
    if x.dim() != m.dim_n() {
        return Err(RreError::DimensionMismatch(format!(
            "covariance is {}x{0} but the state dimension is {}",
            x.dim(),
            m.dim_n()
        )));
    }
    Ok(())
}

/// Open-loop (Lyapunov) map `f0(X) = A X A^T + Q`.
pub fn lyapunov_map(m: &SystemModel, x: &SymMatrix) -> Result<SymMatrix> {
    check_state_dim(m, x)?;
    let a = m.a();
    SymMatrix::new(a * x.as_dmatrix() * a.transpose() + m.q().as_dmatrix())
}

/// Riccati map `f1(X) = A X A^T + Q - A X C^T (C X C^T + R)^{-1} C X A^T`.
///
/// The innovation covariance `S = C X C^T + R` is strictly positive definite
/// for PSD `X` because `R` is; the correction term is evaluated through a
/// Cholesky solve of `S`, never through an explicit inverse.
pub fn riccati_map(m: &SystemModel, x: &SymMatrix) -> Result<SymMatrix> {
    check_state_dim(m, x)?;
    let (a, c) = (m.a(), m.c());
    let s = c * x.as_dmatrix() * c.transpose() + m.r().as_dmatrix();
    let chol = Cholesky::new(s).ok_or_else(|| {
        RreError::Numerical(
            "innovation covariance C X C^T + R is not positive definite \
             (is X symmetric positive semidefinite and finite?)"
                .into(),
        )
    })?;
    // correction = (C X A^T)^T S^{-1} (C X A^T)
    let cxat = c * x.as_dmatrix() * a.transpose();
    let correction = cxat.transpose() * chol.solve(&cxat);
    SymMatrix::new(a * x.as_dmatrix() * a.transpose() + m.q().as_dmatrix() - correction)
}

/// Switched map: `f1` when the observation was received, `f0` otherwise.
pub fn switched_map(m: &SystemModel, received: bool, x: &SymMatrix) -> Result<SymMatrix> {
    if received {
        riccati_map(m, x)
    } else {
        lyapunov_map(m, x)
    }
}

/// A finite word over `{0, 1}` indexing a composition of covariance maps.
/// `bits()[0]` is the outermost letter (applied last); the final letter acts
/// first, matching the notation `f_{i_1} ∘ ... ∘ f_{i_s}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    bits: Vec<bool>,
}

impl Word {
    pub fn empty() -> Self {
        Word { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Word { bits }
    }

    /// Parses a string of `'0'`/`'1'` characters, leftmost = outermost.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(RreError::InvalidArgument(format!(
                        "word must consist of '0'/'1' characters, found {other:?}"
                    )))
                }
            }
        }
        Ok(Word { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// New word with `bit` prepended as the outermost letter.
    pub fn prepend(&self, bit: bool) -> Word {
        let mut bits = Vec::with_capacity(self.bits.len() + 1);
        bits.push(bit);
        bits.extend_from_slice(&self.bits);
        Word { bits }
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Applies the composition denoted by `word` to `x`: the last letter first,
/// the first letter last. The empty word is the identity.
pub fn apply_word(m: &SystemModel, word: &Word, x: &SymMatrix) -> Result<SymMatrix> {
    check_state_dim(m, x)?;
    let mut acc = x.clone();
    for &bit in word.bits().iter().rev() {
        acc = switched_map(m, bit, &acc)?;
    }
    Ok(acc)
}

/// Fixed point of the Riccati map together with the steady-state gain.
#[derive(Debug, Clone)]
pub struct DareSolution {
    /// Steady-state prediction covariance `P*` with `f1(P*) = P*`.
    pub p_star: SymMatrix,
    /// Steady gain `K = -A P* C^T (C P* C^T + R)^{-1}`, so the closed loop
    /// matrix is `F = A + K C`.
    pub gain: DMatrix<f64>,
    /// Riccati-map applications performed.
    pub iterations: usize,
    /// Absolute Frobenius residual `|f1(P*) - P*|_F` at acceptance.
    pub residual: f64,
}

/// Solves the DARE by iterating `f1` from `X_0 = Q` until the relative
/// residual drops below `tol`. Errors unless `(A, C)` is detectable and
/// `(A, Q^{1/2})` stabilizable — the hypotheses under which the iteration
/// converges to the unique stabilizing fixed point.
pub fn solve_dare(m: &SystemModel, tol: f64, max_iter: usize) -> Result<DareSolution> {
    if !check_detectability(m, DEFAULT_PBH_TOL) {
        return Err(RreError::InvalidArgument(
            "(A, C) is not detectable; the DARE iteration need not converge \
             (use solve_dare_unchecked to try anyway)"
                .into(),
        ));
    }
    if !check_stabilizability(m, DEFAULT_PBH_TOL) {
        return Err(RreError::InvalidArgument(
            "(A, Q^{1/2}) is not stabilizable; the DARE fixed point need not \
             be stabilizing (use solve_dare_unchecked to try anyway)"
                .into(),
        ));
    }
    solve_dare_unchecked(m, tol, max_iter)
}

/// [`solve_dare`] without the structural checks, for callers that know what
/// they are doing (or want to watch the iteration fail).
pub fn solve_dare_unchecked(m: &SystemModel, tol: f64, max_iter: usize) -> Result<DareSolution> {
    if !(tol > 0.0) {
        return Err(RreError::InvalidArgument(format!(
            "DARE tolerance must be positive, got {tol}"
        )));
    }
    let mut x = m.q().clone();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = riccati_map(m, &x)?;
        residual = (next.as_dmatrix() - x.as_dmatrix()).norm();
        let accept = residual <= tol * x.frobenius_norm().max(1.0);
        x = next;
        if accept {
            let gain = steady_gain(m, &x)?;
            return Ok(DareSolution {
                p_star: x,
                gain,
                iterations: it,
                residual,
            });
        }
        if !residual.is_finite() {
            return Err(RreError::NonFinite(format!(
                "DARE iteration produced a non-finite residual at iteration {it}"
            )));
        }
    }
    Err(RreError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Steady gain for a fixed covariance: `K = -A P C^T (C P C^T + R)^{-1}`.
fn steady_gain(m: &SystemModel, p: &SymMatrix) -> Result<DMatrix<f64>> {
    let (a, c) = (m.a(), m.c());
    let s = c * p.as_dmatrix() * c.transpose() + m.r().as_dmatrix();
    let chol = Cholesky::new(s).ok_or_else(|| {
        RreError::Numerical("steady innovation covariance is not positive definite".into())
    })?;
    // K^T = -S^{-1} (C P A^T)
    let cpat = c * p.as_dmatrix() * a.transpose();
    Ok(-(chol.solve(&cpat)).transpose())
}
