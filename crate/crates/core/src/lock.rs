//! Simplified model of time-multiplexed phase locking: the relative phase
//! performs a random walk, a first-order servo tracks it during control
//! windows and holds its last correction through each measurement window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Lock timing and noise settings. The default drift and servo values are
/// illustrative, not calibrated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LockConfig {
    pub cycle_s: f64,
    pub control_s: f64,
    pub measure_s: f64,
    pub n_loops: usize,
    /// Probe-beam detunings; carried as metadata.
    pub probe_detunings_hz: Vec<f64>,
    /// Phase diffusion coefficient: `Var[φ(t+τ) − φ(t)] = D·τ`.
    pub drift_rad2_per_s: f64,
    pub servo_bandwidth_hz: f64,
    pub time_step_s: f64,
}

impl Default for LockConfig {
    fn default() -> Self {
        Self {
            cycle_s: 400e-6,
            control_s: 360e-6,
            measure_s: 40e-6,
            n_loops: 7,
            probe_detunings_hz: vec![0.8e6, 0.5e6],
            drift_rad2_per_s: 1.0,
            servo_bandwidth_hz: 10e3,
            time_step_s: 1e-6,
        }
    }
}

impl LockConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cycle", self.cycle_s),
            ("control window", self.control_s),
            ("measurement window", self.measure_s),
            ("time step", self.time_step_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if ((self.control_s + self.measure_s) - self.cycle_s).abs() > 1e-9 * self.cycle_s {
            return Err(invalid("control and measurement windows must add up to the cycle"));
        }
        if self.n_loops == 0 {
            return Err(invalid("need at least one phase lock"));
        }
        if !(self.drift_rad2_per_s >= 0.0) || !self.drift_rad2_per_s.is_finite() {
            return Err(invalid("drift must be non-negative"));
        }
        if !(self.servo_bandwidth_hz >= 0.0) {
            return Err(invalid("servo bandwidth must be non-negative"));
        }
        if self.steps(self.measure_s) == 0 || self.steps(self.control_s) == 0 {
            return Err(invalid("time step longer than a window"));
        }
        Ok(())
    }

    fn steps(&self, window: f64) -> usize {
        (window / self.time_step_s).round() as usize
    }

    /// Fraction of the remaining error removed per control step.
    fn servo_gain(&self) -> f64 {
        if self.servo_bandwidth_hz.is_infinite() {
            1.0
        } else {
            1.0 - (-2.0 * std::f64::consts::PI * self.servo_bandwidth_hz * self.time_step_s).exp()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LockResult {
    /// Combined RMS phase error of each measurement window.
    pub window_rms_rad: Vec<f64>,
    /// RMS error of each loop over all measurement windows.
    pub loop_rms_rad: Vec<f64>,
    /// Root-sum-square of the loops' errors over all measurement windows.
    pub total_rms_rad: f64,
    pub time_step_s: f64,
    /// Error of the first loop at every time step.
    pub series_rad: Vec<f64>,
}

struct LoopRun {
    window_ms: Vec<f64>,
    series: Vec<f64>,
}

fn loop_key(seed: u64, lp: usize) -> u64 {
    let mut z = seed.wrapping_add((lp as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_loop(cfg: &LockConfig, n_cycles: usize, key: u64, record: bool) -> LoopRun {
    let n_control = cfg.steps(cfg.control_s);
    let n_measure = cfg.steps(cfg.measure_s);
    let step_sd = (cfg.drift_rad2_per_s * cfg.time_step_s).sqrt();
    let alpha = cfg.servo_gain();
    let mut error = 0.0f64;
    let mut window_ms = Vec::with_capacity(n_cycles);
    let mut series = Vec::with_capacity(if record { n_cycles * (n_control + n_measure) } else { 0 });
    for cycle in 0..n_cycles {
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(cycle as u64);
        for _ in 0..n_control {
            let z: f64 = rng.sample(StandardNormal);
            error = (1.0 - alpha) * (error + step_sd * z);
            if record {
                series.push(error);
            }
        }
        let mut sq = 0.0;
        for _ in 0..n_measure {
            let z: f64 = rng.sample(StandardNormal);
            error += step_sd * z;
            sq += error * error;
            if record {
                series.push(error);
            }
        }
        window_ms.push(sq / n_measure as f64);
    }
    LoopRun { window_ms, series }
}

/// Simulate `n_cycles` lock cycles of every loop. Loops run in parallel on
/// independent streams; the output depends only on `seed`.
pub fn simulate_residual_phase(cfg: &LockConfig, n_cycles: usize, seed: u64) -> Result<LockResult> {
    cfg.validate()?;
    if n_cycles == 0 {
        return Err(invalid("need at least one cycle"));
    }
    let runs: Vec<LoopRun> = (0..cfg.n_loops)
        .into_par_iter()
        .map(|lp| run_loop(cfg, n_cycles, loop_key(seed, lp), lp == 0))
        .collect();
    let window_rms_rad = (0..n_cycles)
        .map(|c| runs.iter().map(|r| r.window_ms[c]).sum::<f64>().sqrt())
        .collect();
    let loop_ms: Vec<f64> = runs
        .iter()
        .map(|r| r.window_ms.iter().sum::<f64>() / n_cycles as f64)
        .collect();
    let total_rms_rad = loop_ms.iter().sum::<f64>().sqrt();
    let series_rad = runs.into_iter().next().map(|r| r.series).unwrap_or_default();
    Ok(LockResult {
        window_rms_rad,
        loop_rms_rad: loop_ms.iter().map(|m| m.sqrt()).collect(),
        total_rms_rad,
        time_step_s: cfg.time_step_s,
        series_rad,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseAveraging {
    /// Average of `cos²φ` over a Gaussian phase distribution.
    #[default]
    Exact,
    /// `⟨sin²φ⟩ ≈ σ²`, clamped to `[0, 1]`.
    SecondOrder,
}

/// Variance measured along a quadrature whose angle fluctuates with RMS
/// `phase_rms` about the target, mixing in the orthogonal variance.
pub fn degrade_with_phase<T: Real>(v_target: T, v_ortho: T, phase_rms: T, method: PhaseAveraging) -> T {
    let s2 = phase_rms * phase_rms;
    let w = match method {
        PhaseAveraging::Exact => (T::one() - (-T::two() * s2).exp()) * T::half(),
        PhaseAveraging::SecondOrder => s2.min(T::one()),
    };
    v_target * (T::one() - w) + v_ortho * w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> LockConfig {
        LockConfig::default()
    }

    #[test]
    fn zero_drift_gives_zero_residual() {
        let c = LockConfig {
            drift_rad2_per_s: 0.0,
            ..cfg()
        };
        let r = simulate_residual_phase(&c, 10, 1).unwrap();
        assert_eq!(r.total_rms_rad, 0.0);
    }

    #[test]
    fn ideal_servo_matches_random_walk_average() {
        // error restarts at zero every window: mean over the window of
        // D·j·dt for j = 1..M is D·dt·(M + 1)/2
        let c = LockConfig {
            servo_bandwidth_hz: f64::INFINITY,
            n_loops: 1,
            ..cfg()
        };
        let r = simulate_residual_phase(&c, 4000, 3).unwrap();
        let m = 40.0;
        let expected = c.drift_rad2_per_s * c.time_step_s * (m + 1.0) / 2.0;
        let got = r.total_rms_rad.powi(2);
        assert!((got / expected - 1.0).abs() < 0.05, "{got} {expected}");
    }

    #[test]
    fn ideal_servo_and_short_window_vanish() {
        let mut c = LockConfig {
            servo_bandwidth_hz: f64::INFINITY,
            ..cfg()
        };
        let mut last = f64::INFINITY;
        for measure in [40e-6, 4e-6, 0.4e-6] {
            c.measure_s = measure;
            c.control_s = c.cycle_s - measure;
            c.time_step_s = measure / 20.0;
            let r = simulate_residual_phase(&c, 200, 5).unwrap().total_rms_rad;
            assert!(r < last);
            last = r;
        }
        assert!(last < 2e-3);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = simulate_residual_phase(&cfg(), 20, 9).unwrap();
        let b = simulate_residual_phase(&cfg(), 20, 9).unwrap();
        let c = simulate_residual_phase(&cfg(), 20, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.series_rad.len(), 20 * 400);
    }

    #[test]
    fn window_sum_must_match_cycle() {
        let c = LockConfig {
            measure_s: 50e-6,
            ..cfg()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn phase_averaging_limits() {
        for m in [PhaseAveraging::Exact, PhaseAveraging::SecondOrder] {
            assert_eq!(degrade_with_phase(0.1f64, 10.0, 0.0, m), 0.1);
            assert!((degrade_with_phase(2.0f64, 2.0, 0.7, m) - 2.0).abs() < 1e-15);
            assert!((degrade_with_phase(2.0f32, 2.0, 0.7, m) - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn phase_averaging_matches_quadrature_oracle() {
        let (vt, vo, s) = (0.1, 10.0, 0.03);
        // trapezoid over ±8σ of the Gaussian phase density
        let n = 20_000;
        let h = 16.0 * s / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let phi = -8.0 * s + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let pdf = (-phi * phi / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            acc += w * pdf * (vt * phi.cos().powi(2) + vo * phi.sin().powi(2));
        }
        let oracle = acc * h;
        let exact = degrade_with_phase(vt, vo, s, PhaseAveraging::Exact);
        assert!((exact - oracle).abs() < 1e-10, "{exact} {oracle}");
        let approx = degrade_with_phase(vt, vo, s, PhaseAveraging::SecondOrder);
        assert!((approx - oracle).abs() < 1e-4);
    }
}
