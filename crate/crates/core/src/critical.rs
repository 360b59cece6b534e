//! Bounds on the critical arrival probability.
//!
//! There is a critical rate `gamma_c` below which the expected covariance
//! diverges and above which it stays bounded. Two computable bounds bracket
//! it:
//!
//! - **Lower bound** `gamma_l = max(0, 1 - 1/alpha^2)`, with `alpha` the
//!   spectral radius of `A`: below this rate even the averaged closed-loop
//!   dynamics cannot contract the unstable modes.
//! - **Upper bound** via the fixed-gain operator
//!
//!   ```text
//!       phi^gamma(K, X) = (1 - gamma)(A X A^T + Q) + gamma (F X F^T + V),
//!       F = A + K C,   V = Q + K R K^T.
//!   ```
//!
//!   If `X >> phi^gamma(K, X)` has a strictly positive definite solution,
//!   the expected covariance is bounded at rate `gamma`. Existence of such
//!   an `X` is equivalent to the linear part being a contraction:
//!   `rho((1 - gamma) A ⊗ A + gamma F ⊗ F) < 1`. With `K` frozen at the
//!   steady-state Kalman gain, bisection over `gamma` locates the smallest
//!   feasible rate — an upper bound for `gamma_c` (possibly conservative,
//!   since a single gain stands in for the infimum over gain sequences).
//!
//! For detectable/stabilizable systems the critical rate for boundedness in
//! probability is zero ([`gamma_sb`]): sample paths concentrate even when
//! the mean diverges.

use nalgebra::DMatrix;

use crate::error::{Result, RreError};
use crate::maps::{solve_dare, DEFAULT_DARE_MAX_ITER, DEFAULT_DARE_TOL};
use crate::model::{
    check_detectability, check_stabilizability, spectral_abscissa, SymMatrix, SystemModel,
    DEFAULT_PBH_TOL,
};

/// Default bisection width at which the upper-bound search stops.
pub const DEFAULT_BISECT_TOL: f64 = 1e-6;

/// State dimension up to which the Kronecker matrix (`n^2 x n^2`) is
/// eigendecomposed densely; above it a power iteration on the operator form
/// is used instead.
const KRON_DENSE_DIM_LIMIT: usize = 30;

/// Grid size of the monotonicity sanity check run before bisecting.
const MONOTONICITY_GRID: usize = 10;

/// Lower bound `max(0, 1 - 1/alpha^2)` on the critical arrival probability;
/// zero for stable `A`.
pub fn lower_bound(m: &SystemModel) -> f64 {
    let alpha = spectral_abscissa(m);
    (1.0 - 1.0 / (alpha * alpha)).max(0.0)
}

/// Fixed-gain averaged operator
/// `phi^gamma(K, X) = (1-gamma)(A X A^T + Q) + gamma (F X F^T + Q + K R K^T)`.
pub fn phi_operator(
    m: &SystemModel,
    gamma_bar: f64,
    gain: &DMatrix<f64>,
    x: &SymMatrix,
) -> Result<SymMatrix> {
    validate_gamma(gamma_bar)?;
    validate_gain(m, gain)?;
    if x.dim() != m.dim_n() {
        return Err(RreError::DimensionMismatch(format!(
            "X is {}x{0}, state dimension is {}",
            x.dim(),
            m.dim_n()
        )));
    }
    let a = m.a();
    let f = a + gain * m.c();
    let v = m.q().as_dmatrix() + gain * m.r().as_dmatrix() * gain.transpose();
    let open = a * x.as_dmatrix() * a.transpose() + m.q().as_dmatrix();
    let closed = &f * x.as_dmatrix() * f.transpose() + v;
    SymMatrix::new(open * (1.0 - gamma_bar) + closed * gamma_bar)
}

/// Outcome of the fixed-gain feasibility test at one arrival rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    /// Spectral radius of `(1-gamma) A ⊗ A + gamma F ⊗ F`.
    pub spectral_radius: f64,
    /// True iff the radius is below one, i.e. `X >> phi^gamma(K, X)` is
    /// solvable with `X >> 0`.
    pub feasible: bool,
}

/// Tests whether the fixed-gain operator admits a strictly positive definite
/// `X` with `X >> phi^gamma(K, X)`.
pub fn feasibility(m: &SystemModel, gamma_bar: f64, gain: &DMatrix<f64>) -> Result<Feasibility> {
    validate_gamma(gamma_bar)?;
    validate_gain(m, gain)?;
    let rho = linear_part_radius(m, gamma_bar, gain)?;
    Ok(Feasibility {
        spectral_radius: rho,
        feasible: rho < 1.0,
    })
}

/// Critical-probability bracket report.
#[derive(Debug, Clone)]
pub struct CriticalBounds {
    pub lower: f64,
    pub upper: f64,
    /// Spectral radius of `A`.
    pub alpha: f64,
    /// Gain frozen during the upper-bound search.
    pub gain: DMatrix<f64>,
    /// Spectral radius of the linear part at the returned upper bound
    /// (strictly below one).
    pub spectral_radius_at_upper: f64,
    pub bisect_tol: f64,
    /// Method notes for the report consumer.
    pub notes: String,
}

/// Options for [`upper_bound_with`].
#[derive(Debug, Clone, Copy)]
pub struct UpperBoundOptions {
    pub bisect_tol: f64,
    /// When set, additionally scans scaled gains `c K` for
    /// `c in [0.5, 1.5]` on a grid of this many points and keeps the best
    /// (smallest) upper bound. Off by default — the steady gain is almost
    /// always within bisection tolerance of the scan's optimum.
    pub gain_scale_scan: Option<usize>,
}

impl Default for UpperBoundOptions {
    fn default() -> Self {
        UpperBoundOptions {
            bisect_tol: DEFAULT_BISECT_TOL,
            gain_scale_scan: None,
        }
    }
}

/// Upper bound for the critical probability with the gain frozen at the
/// steady-state Kalman gain, located by bisection on the feasibility radius.
pub fn upper_bound(m: &SystemModel, bisect_tol: f64) -> Result<CriticalBounds> {
    upper_bound_with(
        m,
        UpperBoundOptions {
            bisect_tol,
            ..UpperBoundOptions::default()
        },
    )
}

/// [`upper_bound`] with an optional coarse scan over scaled gains.
pub fn upper_bound_with(m: &SystemModel, opts: UpperBoundOptions) -> Result<CriticalBounds> {
    if !(opts.bisect_tol > 0.0 && opts.bisect_tol < 0.5) {
        return Err(RreError::InvalidArgument(format!(
            "bisection tolerance must lie in (0, 0.5), got {}",
            opts.bisect_tol
        )));
    }
    if !check_detectability(m, DEFAULT_PBH_TOL) || !check_stabilizability(m, DEFAULT_PBH_TOL) {
        return Err(RreError::InvalidArgument(
            "upper bound requires a detectable and stabilizable system \
             (the frozen gain comes from the DARE)"
                .into(),
        ));
    }
    let dare = solve_dare(m, DEFAULT_DARE_TOL, DEFAULT_DARE_MAX_ITER)?;
    let base_gain = dare.gain;

    let mut best: Option<(f64, f64, DMatrix<f64>, String)> = None;
    let scales: Vec<f64> = match opts.gain_scale_scan {
        None => vec![1.0],
        Some(points) => {
            if points < 2 {
                return Err(RreError::InvalidArgument(
                    "gain scan needs at least two grid points".into(),
                ));
            }
            (0..points)
                .map(|i| 0.5 + i as f64 / (points - 1) as f64)
                .collect()
        }
    };
    for scale in scales {
        let gain = &base_gain * scale;
        match bisect_upper(m, &gain, opts.bisect_tol)? {
            Some((upper, rho)) => {
                let better = best.as_ref().map_or(true, |(u, _, _, _)| upper < *u);
                if better {
                    let notes = if scale == 1.0 {
                        "gain frozen at the steady-state Kalman gain".to_string()
                    } else {
                        format!("gain scaled by {scale:.3} from the steady-state Kalman gain")
                    };
                    best = Some((upper, rho, gain, notes));
                }
            }
            None => continue, // this scaled gain is infeasible even at rate 1
        }
    }
    let (upper, rho_at_upper, gain, notes) = best.ok_or_else(|| {
        RreError::Numerical(
            "no scanned gain stabilizes the averaged dynamics even at \
             arrival rate 1"
                .into(),
        )
    })?;

    Ok(CriticalBounds {
        lower: lower_bound(m),
        upper,
        alpha: spectral_abscissa(m),
        gain,
        spectral_radius_at_upper: rho_at_upper,
        bisect_tol: opts.bisect_tol,
        notes,
    })
}

/// Bisects the smallest feasible rate for one frozen gain. Returns `None`
/// when even `gamma = 1` is infeasible; `Some((0.0, rho(0)))` when the open
/// loop is already stable.
fn bisect_upper(
    m: &SystemModel,
    gain: &DMatrix<f64>,
    bisect_tol: f64,
) -> Result<Option<(f64, f64)>> {
    let rho_at = |g: f64| linear_part_radius(m, g, gain);

    let rho1 = rho_at(1.0)?;
    if rho1 >= 1.0 {
        return Ok(None);
    }
    let rho0 = rho_at(0.0)?;
    if rho0 < 1.0 {
        return Ok(Some((0.0, rho0)));
    }

    // The bisection assumes the radius decreases in gamma; spot-check on a
    // grid before trusting it.
    let mut prev = rho0;
    for i in 1..=MONOTONICITY_GRID {
        let g = i as f64 / MONOTONICITY_GRID as f64;
        let rho = rho_at(g)?;
        if rho > prev + 1e-9 {
            return Err(RreError::Numerical(format!(
                "feasibility radius is not monotone in the arrival rate \
                 (rho({}) = {prev:.6} < rho({g}) = {rho:.6}); bisection \
                 would be unsound for this gain",
                g - 1.0 / MONOTONICITY_GRID as f64,
            )));
        }
        prev = rho;
    }

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > bisect_tol {
        let mid = 0.5 * (lo + hi);
        if rho_at(mid)? < 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let rho_hi = rho_at(hi)?;
    Ok(Some((hi, rho_hi)))
}

/// Critical probability for boundedness in probability (the weak sense):
/// zero whenever the system is detectable and stabilizable, `None` outside
/// those hypotheses (no general statement applies). Pair with
/// `stats::boundedness_probe` for the empirical picture.
pub fn gamma_sb(m: &SystemModel) -> Option<f64> {
    if check_detectability(m, DEFAULT_PBH_TOL) && check_stabilizability(m, DEFAULT_PBH_TOL) {
        Some(0.0)
    } else {
        None
    }
}

fn validate_gamma(gamma_bar: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma_bar) {
        return Err(RreError::InvalidArgument(format!(
            "arrival probability must lie in [0, 1], got {gamma_bar}"
        )));
    }
    Ok(())
}

fn validate_gain(m: &SystemModel, gain: &DMatrix<f64>) -> Result<()> {
    if gain.nrows() != m.dim_n() || gain.ncols() != m.dim_m() {
        return Err(RreError::DimensionMismatch(format!(
            "gain must be {}x{}, got {}x{}",
            m.dim_n(),
            m.dim_m(),
            gain.nrows(),
            gain.ncols()
        )));
    }
    Ok(())
}

/// Spectral radius of `(1-gamma) A ⊗ A + gamma F ⊗ F`: dense eigenvalues up
/// to [`KRON_DENSE_DIM_LIMIT`], power iteration on the operator form above.
fn linear_part_radius(m: &SystemModel, gamma_bar: f64, gain: &DMatrix<f64>) -> Result<f64> {
    let a = m.a();
    let f = a + gain * m.c();
    let n = m.dim_n();
    if n <= KRON_DENSE_DIM_LIMIT {
        let kron = a.kronecker(a) * (1.0 - gamma_bar) + f.kronecker(&f) * gamma_bar;
        Ok(kron
            .complex_eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, l| acc.max(l.norm())))
    } else {
        power_iteration_radius(m, gamma_bar, &f)
    }
}

/// Power iteration for the PSD-cone map `X -> (1-g) A X A^T + g F X F^T`.
/// The map preserves the cone, so iterating from the identity converges to
/// the Perron eigenvalue — which equals the Kronecker spectral radius.
fn power_iteration_radius(m: &SystemModel, gamma_bar: f64, f: &DMatrix<f64>) -> Result<f64> {
    let a = m.a();
    let n = m.dim_n();
    let apply = |x: &DMatrix<f64>| -> DMatrix<f64> {
        a * x * a.transpose() * (1.0 - gamma_bar) + f * x * f.transpose() * gamma_bar
    };
    let mut x = DMatrix::<f64>::identity(n, n);
    let mut radius = 0.0_f64;
    for it in 0..100_000 {
        let y = apply(&x);
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(RreError::Numerical(
                "power iteration for the feasibility radius degenerated".into(),
            ));
        }
        // Rayleigh-type estimate: |L(x)| with |x| = 1.
        let delta = (norm - radius).abs();
        radius = norm;
        x = y / norm;
        if it > 10 && delta <= 1e-12 * radius.max(1.0) {
            return Ok(radius);
        }
    }
    Err(RreError::Numerical(
        "power iteration for the feasibility radius did not converge".into(),
    ))
}
