use crate::error::{Error, Result};

use super::stats::AutoCorrelation;

/// Full width at half maximum of `|I(τ) − baseline|`, in seconds.
///
/// The baseline is the mean over the last quarter of the lags. The
/// half-maximum crossing is located by linear interpolation and mirrored,
/// the auto-correlation being even in τ; a crossing inside the baseline
/// window means the lag range is too short and is reported as an error.
pub fn correlation_width(ac: &AutoCorrelation) -> Result<f64> {
    let v = &ac.values;
    let t = &ac.lags_s;
    if v.len() < 4 || t.len() != v.len() {
        return Err(Error::Model("auto-correlation too short to estimate a width".into()));
    }
    let tail_start = v.len() - v.len() / 4;
    let tail = &v[tail_start..];
    let baseline = tail.iter().sum::<f64>() / tail.len() as f64;
    let mag: Vec<f64> = v.iter().map(|x| (x - baseline).abs()).collect();
    let half = mag[0] / 2.0;
    if !(half > 0.0) {
        return Err(Error::Model("auto-correlation has no peak above its baseline".into()));
    }
    for k in 1..tail_start {
        if mag[k] <= half {
            let (a, b) = (mag[k - 1], mag[k]);
            let frac = if a == b { 0.0 } else { (a - half) / (a - b) };
            return Ok(2.0 * (t[k - 1] + frac * (t[k] - t[k - 1])));
        }
    }
    Err(Error::Model("auto-correlation never falls to half maximum; increase the lag range".into()))
}
