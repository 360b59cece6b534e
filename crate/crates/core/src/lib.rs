//! Random Riccati equation toolkit.
//!
//! Implements, simulates and statistically characterizes the discrete-time
//! random Riccati equation that governs the prediction error covariance of a
//! Kalman filter whose observations arrive over an i.i.d. Bernoulli erasure
//! channel:
//!
//! ```text
//!     P_{t+1} = A P_t A^T + Q
//!               - gamma_t * A P_t C^T (C P_t C^T + R)^{-1} C P_t A^T,
//!     gamma_t ~ Bernoulli(gamma_bar), i.i.d.
//! ```
//!
//! When `gamma_t = 1` the observation was received and the update is the
//! classical Riccati map; when `gamma_t = 0` the covariance obeys the open
//! loop Lyapunov map. The library covers:
//!
//! - the system model, Loewner-order utilities and PBH structural tests
//!   ([`model`]);
//! - the two covariance maps, word compositions and the deterministic DARE
//!   fixed point ([`maps`]);
//! - seeded trajectory/ensemble simulation of the covariance recursion and
//!   of the filter itself ([`simulator`]);
//! - empirical distributions, ergodic averages and boundedness probes
//!   ([`stats`]);
//! - enumeration of the support of the invariant distribution and the
//!   fractal interval partition of the scalar example ([`support`]);
//! - lower/upper bounds for the critical arrival probability ([`critical`]);
//! - experiment configs, CSV/JSON outputs and run manifests ([`config_io`]).

pub mod config_io;
pub mod critical;
pub mod error;
pub mod maps;
pub mod model;
pub mod presets;
pub mod simulator;
pub mod stats;
pub mod support;

pub mod cli;

pub use error::{Result, RreError};
pub use model::{SymMatrix, SystemModel};
