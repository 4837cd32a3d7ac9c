//! Scalar abstraction for the closed-form math.
//!
//! The Gaussian-state engine, the efficiency formulas, the squeezing
//! spectrum and the phase-averaging model are written once over [`Real`]
//! and instantiated for `f32` and `f64`. Signal synthesis and analysis work
//! in `f64` only, since their on-disk format and statistics accumulate in
//! double precision.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type usable by the generic numerics.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance for eigenvalue and symmetry checks at this precision.
    const TOLERANCE: Self;
    /// Tolerance for the relative symmetry check of covariance matrices.
    const SYMMETRY_TOLERANCE: Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn half() -> Self {
        Self::lit(0.5)
    }

    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Real for f64 {
    const TOLERANCE: Self = 1e-10;
    const SYMMETRY_TOLERANCE: Self = 1e-12;
}

impl Real for f32 {
    const TOLERANCE: Self = 1e-4;
    const SYMMETRY_TOLERANCE: Self = 1e-5;
}
