//! Covariance-matrix engine for multimode Gaussian states.
//!
//! Conventions: `ħ = 1`, `[x, p] = i`, so the vacuum quadrature variance is
//! `1/2`. Phase-space vectors are ordered `x1, p1, x2, p2, ...`.

mod efficiency;
mod state;

pub use efficiency::{db_to_linear, eta_meas, eta_total, linear_to_db, squeezing_for_target_db};
pub use state::{GaussianState, PsaParams};
