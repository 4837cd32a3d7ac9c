use crate::error::{invalid, Result};
use crate::scalar::Real;

fn check_unit<T: Real>(name: &str, v: T) -> Result<()> {
    if !(v >= T::zero() && v <= T::one()) {
        return Err(invalid(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Effective efficiency of a phase-sensitive preamplifier followed by a
/// lossy homodyne detector: `η_OPA·η_HD / (η_HD + (1 − η_HD)/G)`.
///
/// `gain` is the linear power gain; unit gain means no amplification.
pub fn eta_meas<T: Real>(gain: T, eta_opa: T, eta_hd: T) -> Result<T> {
    if !(gain >= T::one()) {
        return Err(invalid(format!(
            "linear gain must be >= 1 (0 dB is a gain of 1), got {gain}"
        )));
    }
    check_unit("eta_opa", eta_opa)?;
    check_unit("eta_hd", eta_hd)?;
    if gain.is_infinite() {
        return Ok(eta_opa);
    }
    let denom = eta_hd + (T::one() - eta_hd) / gain;
    if denom == T::zero() {
        // eta_hd = 0 and G finite: nothing reaches the detector.
        return Ok(T::zero());
    }
    Ok(eta_opa * eta_hd / denom)
}

/// Overall efficiency of state preparation followed by measurement.
pub fn eta_total<T: Real>(eta_state: T, eta_meas: T) -> Result<T> {
    check_unit("eta_state", eta_state)?;
    check_unit("eta_meas", eta_meas)?;
    Ok(eta_state * eta_meas)
}

pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

pub fn linear_to_db<T: Real>(ratio: T) -> T {
    T::lit(10.0) * ratio.log10()
}

/// Squeezing parameter `r` such that a pure squeezed quadrature seen with
/// overall efficiency `eta` sits at `target_db` relative to shot noise:
/// `η·e^{−2r} + 1 − η = 10^{target_db/10}`.
pub fn squeezing_for_target_db<T: Real>(eta: T, target_db: T) -> Result<T> {
    check_unit("eta", eta)?;
    let level = db_to_linear(target_db);
    let e2r = (level - (T::one() - eta)) / eta;
    if !(e2r > T::zero() && e2r <= T::one()) {
        return Err(invalid(format!(
            "{target_db} dB is not reachable with efficiency {eta}"
        )));
    }
    Ok(-T::half() * e2r.ln())
}
