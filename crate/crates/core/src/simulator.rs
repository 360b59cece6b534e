//! Seeded simulation of the covariance recursion and of the filter itself.
//!
//! Randomness is organized around a splittable scheme: a base seed selects a
//! ChaCha8 key and every replicate owns one of its 2^64 independent streams,
//! so ensembles are embarrassingly parallel yet bit-reproducible regardless
//! of thread scheduling. Arrival indicators are produced by thresholding the
//! stream's uniforms (`u_t < gamma_bar`), which has a useful side effect:
//! runs that share a seed but differ in `gamma_bar` receive nested arrival
//! sets, realizing the monotone coupling that makes covariance trajectories
//! pathwise comparable across arrival rates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, RreError};
use crate::maps::{lyapunov_map, riccati_map, switched_map};
use crate::model::{SymMatrix, SystemModel, DEFAULT_PSD_TOL};

/// Default number of initial steps discarded by ergodic averages.
pub const DEFAULT_BURN_IN: usize = 200;

/// Full-trajectory storage cap, in retained matrices: beyond this, use the
/// streaming drivers and keep functionals instead.
pub const MAX_RETAINED_STEPS: usize = 100_000;

/// ChaCha stream index reserved for noise generation in [`run_filter`], far
/// outside the replicate range so arrival and noise streams never collide
/// even when the same seed is used for both.
const NOISE_STREAM: u64 = u64::MAX;

/// ChaCha8 generator for `(seed, stream)`; stream 0 is the base trajectory,
/// streams `1..` index ensemble replicates.
pub(crate) fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Bernoulli arrival sequence specification: rate plus base seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalProcess {
    gamma_bar: f64,
    seed: u64,
}

impl ArrivalProcess {
    pub fn new(gamma_bar: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma_bar) {
            return Err(RreError::InvalidArgument(format!(
                "arrival probability must lie in [0, 1], got {gamma_bar}"
            )));
        }
        Ok(ArrivalProcess { gamma_bar, seed })
    }

    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Arrival indicators for one replicate stream.
    pub(crate) fn indicators(&self, replicate: u64, t: usize) -> ArrivalIter {
        ArrivalIter {
            rng: keyed_rng(self.seed, replicate),
            gamma_bar: self.gamma_bar,
            remaining: t,
        }
    }
}

pub(crate) struct ArrivalIter {
    rng: ChaCha8Rng,
    gamma_bar: f64,
    remaining: usize,
}

impl Iterator for ArrivalIter {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let u: f64 = self.rng.random();
        Some(u < self.gamma_bar)
    }
}

/// Draws the length-`t` arrival sequence of the base stream (replicate 0).
/// Identical `(gamma_bar, seed, t)` always yields the identical sequence.
pub fn sample_arrivals(ap: &ArrivalProcess, t: usize) -> Vec<bool> {
    ap.indicators(0, t).collect()
}

/// A realized covariance trajectory: `covs[0] = p0` and
/// `covs[k+1] = f_{arrivals[k]}(covs[k])`.
#[derive(Debug, Clone)]
pub struct CovTrajectory {
    pub p0: SymMatrix,
    pub arrivals: Vec<bool>,
    pub covs: Vec<SymMatrix>,
}

impl CovTrajectory {
    pub fn horizon(&self) -> usize {
        self.arrivals.len()
    }
}

fn check_p0(m: &SystemModel, p0: &SymMatrix) -> Result<()> {
    if p0.dim() != m.dim_n() {
        return Err(RreError::DimensionMismatch(format!(
            "p0 is {}x{0} but the state dimension is {}",
            p0.dim(),
            m.dim_n()
        )));
    }
    if !p0.is_psd(DEFAULT_PSD_TOL) {
        return Err(RreError::InvalidArgument(
            "p0 must be positive semidefinite".into(),
        ));
    }
    Ok(())
}

/// Runs the recursion on the base arrival stream, retaining the full
/// trajectory. Horizons above [`MAX_RETAINED_STEPS`] are rejected — stream
/// with [`fold_rre`] or use the `stats` ensembles instead, which retain
/// functionals only.
pub fn run_rre(m: &SystemModel, ap: &ArrivalProcess, p0: &SymMatrix, t: usize) -> Result<CovTrajectory> {
    check_p0(m, p0)?;
    if t > MAX_RETAINED_STEPS {
        return Err(RreError::InvalidArgument(format!(
            "horizon {t} exceeds the full-trajectory retention budget \
             ({MAX_RETAINED_STEPS}); use the streaming interfaces"
        )));
    }
    let mut covs = Vec::with_capacity(t + 1);
    let mut arrivals = Vec::with_capacity(t);
    covs.push(p0.clone());
    let mut current = p0.clone();
    for (step, bit) in ap.indicators(0, t).enumerate() {
        current = switched_map(m, bit, &current)?;
        if !current.trace().is_finite() {
            return Err(RreError::NonFinite(format!(
                "covariance overflowed at step {} (gamma_bar = {})",
                step + 1,
                ap.gamma_bar()
            )));
        }
        arrivals.push(bit);
        covs.push(current.clone());
    }
    Ok(CovTrajectory {
        p0: p0.clone(),
        arrivals,
        covs,
    })
}

/// Streams one replicate of the recursion without retaining the trajectory.
/// `visit(step, arrived, cov)` observes each post-update covariance
/// (`step` counts from 1). Returns the final covariance.
pub fn fold_rre(
    m: &SystemModel,
    ap: &ArrivalProcess,
    replicate: u64,
    p0: &SymMatrix,
    t: usize,
    mut visit: impl FnMut(usize, bool, &SymMatrix),
) -> Result<SymMatrix> {
    check_p0(m, p0)?;
    let mut current = p0.clone();
    for (step, bit) in ap.indicators(replicate, t).enumerate() {
        current = switched_map(m, bit, &current)?;
        if !current.trace().is_finite() {
            return Err(RreError::NonFinite(format!(
                "covariance overflowed at step {} of replicate {replicate} \
                 (gamma_bar = {})",
                step + 1,
                ap.gamma_bar()
            )));
        }
        visit(step + 1, bit, &current);
    }
    Ok(current)
}

/// One-step transition kernel at `x`: atoms `(f0(x), 1 - gamma_bar)` and
/// `(f1(x), gamma_bar)`. Zero-probability atoms are dropped, so the
/// degenerate rates 0 and 1 yield a single-atom kernel.
pub fn transition_kernel(
    m: &SystemModel,
    gamma_bar: f64,
    x: &SymMatrix,
) -> Result<Vec<(SymMatrix, f64)>> {
    if !(0.0..=1.0).contains(&gamma_bar) {
        return Err(RreError::InvalidArgument(format!(
            "arrival probability must lie in [0, 1], got {gamma_bar}"
        )));
    }
    let mut atoms = Vec::with_capacity(2);
    if gamma_bar < 1.0 {
        atoms.push((lyapunov_map(m, x)?, 1.0 - gamma_bar));
    }
    if gamma_bar > 0.0 {
        atoms.push((riccati_map(m, x)?, gamma_bar));
    }
    Ok(atoms)
}

/// A joint realization of state, observations and filter estimates.
///
/// Index conventions: `states[t]` is `x_t` for `t = 0..=T`;
/// `predictions[t]` is the one-step predictor `xhat_{t|t-1}` (with
/// `predictions[0] = 0`, the prior mean); `errors[t] = states[t] -
/// predictions[t]`, whose conditional covariance given the arrival sequence
/// is exactly `covs[t]`; `observations[t]` is `y_t` when it arrived,
/// `None` when the channel dropped it.
#[derive(Debug, Clone)]
pub struct FilterRun {
    pub arrivals: Vec<bool>,
    pub states: Vec<DVector<f64>>,
    pub observations: Vec<Option<DVector<f64>>>,
    pub predictions: Vec<DVector<f64>>,
    pub errors: Vec<DVector<f64>>,
    pub covs: Vec<SymMatrix>,
}

/// Simulates the system (`x0 ~ N(0, p0)`, `w ~ N(0, Q)`, `v ~ N(0, R)`)
/// together with the intermittent Kalman predictor. Arrivals come from `ap`'s
/// base stream; process/measurement noise from the separate `noise_seed`, so
/// ensembles over noise share a single arrival sequence. The covariance leg
/// runs the same recursion as [`run_rre`] and matches it exactly for equal
/// seeds.
pub fn run_filter(
    m: &SystemModel,
    ap: &ArrivalProcess,
    noise_seed: u64,
    p0: &SymMatrix,
    t: usize,
) -> Result<FilterRun> {
    check_p0(m, p0)?;
    if t > MAX_RETAINED_STEPS {
        return Err(RreError::InvalidArgument(format!(
            "horizon {t} exceeds the full-trajectory retention budget \
             ({MAX_RETAINED_STEPS})"
        )));
    }
    let (n, mm) = (m.dim_n(), m.dim_m());
    let mut noise = keyed_rng(noise_seed, NOISE_STREAM);
    let mut gaussian = |dim: usize, factor: &DMatrix<f64>| -> DVector<f64> {
        let z = DVector::from_fn(dim, |_, _| noise.sample(StandardNormal));
        factor * z
    };

    // PSD square roots (never Cholesky: Q and p0 may be singular).
    let sq_p0 = p0.sqrt_psd().into_dmatrix();
    let sq_q = m.q().sqrt_psd().into_dmatrix();
    let sq_r = m.r().sqrt_psd().into_dmatrix();

    let arrivals: Vec<bool> = sample_arrivals(ap, t);
    let mut states = Vec::with_capacity(t + 1);
    let mut predictions = Vec::with_capacity(t + 1);
    let mut observations = Vec::with_capacity(t);
    let mut covs = Vec::with_capacity(t + 1);

    let mut x = gaussian(n, &sq_p0);
    let mut xhat = DVector::zeros(n);
    let mut p = p0.clone();
    states.push(x.clone());
    predictions.push(xhat.clone());
    covs.push(p.clone());

    let a = m.a();
    let c = m.c();
    for &arrived in &arrivals {
        let y = c * &x + gaussian(mm, &sq_r);
        if arrived {
            // Kalman gain of the current prediction covariance.
            let s = c * p.as_dmatrix() * c.transpose() + m.r().as_dmatrix();
            let chol = nalgebra::Cholesky::new(s).ok_or_else(|| {
                RreError::Numerical("innovation covariance is not positive definite".into())
            })?;
            let cpat = c * p.as_dmatrix() * a.transpose();
            let gain = chol.solve(&cpat).transpose(); // A P C^T S^{-1}
            xhat = a * &xhat + &gain * (&y - c * &xhat);
            observations.push(Some(y));
        } else {
            xhat = a * &xhat;
            observations.push(None);
        }
        p = switched_map(m, arrived, &p)?;
        x = a * &x + gaussian(n, &sq_q);
        states.push(x.clone());
        predictions.push(xhat.clone());
        covs.push(p.clone());
    }

    let errors = states
        .iter()
        .zip(&predictions)
        .map(|(s, pr)| s - pr)
        .collect();
    Ok(FilterRun {
        arrivals,
        states,
        observations,
        predictions,
        errors,
        covs,
    })
}
