//! Simulation and analysis of ultrafast two-mode (EPR) quadrature
//! correlations measured through phase-sensitive preamplification and
//! broadband homodyne detection.
//!
//! The pipeline runs in four stages:
//!
//! - [`gaussian`]: exact covariance-matrix propagation (squeezers,
//!   beamsplitters, loss, phase-sensitive amplification).
//! - [`spectral`]: per-frequency 2×2 power spectral densities of the two
//!   detected quadrature channels, including the detection filter chain and
//!   electronic noise.
//! - [`synth`]: seeded synthesis of real-time traces whose statistics match
//!   those spectra.
//! - [`analysis`]: shot-referenced noise powers, auto-correlations,
//!   wavepacket-mode variances, the Duan sum and the two-parameter efficiency
//!   fit.
//!
//! [`lock`] adds a simplified model of the time-multiplexed phase locks and
//! [`config`] holds the versioned JSON run configuration.

pub mod analysis;
pub mod config;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod lock;
pub mod predict;
pub mod scalar;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

/// Vacuum quadrature variance under `[x, p] = i`.
pub const SHOT_VARIANCE: f64 = 0.5;

pub type GaussianState64 = gaussian::GaussianState<f64>;
pub type GaussianState32 = gaussian::GaussianState<f32>;
pub type PsaParams64 = gaussian::PsaParams<f64>;
pub type PsaParams32 = gaussian::PsaParams<f32>;
