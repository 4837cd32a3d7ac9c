//! Versioned JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisOptions, ModeSpec};
use crate::error::{invalid, Result};
use crate::gaussian::squeezing_for_target_db;
use crate::lock::{simulate_residual_phase, LockConfig, LockResult};
use crate::spectral::ExperimentParams;
use crate::synth::Acquisition;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    /// Band for the in-band variance; `null` disables it.
    #[serde(default = "default_band")]
    pub band_limit_hz: Option<f64>,
}

fn default_max_lag() -> usize {
    40
}

fn default_band() -> Option<f64> {
    Some(66e9)
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            max_lag: default_max_lag(),
            band_limit_hz: default_band(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; the command line `--out` takes precedence.
    #[serde(default)]
    pub dir: Option<String>,
    /// Also write CSV curves and per-frame CSV exports.
    #[serde(default)]
    pub csv: bool,
    /// Frames exported as CSV when `csv` is set.
    #[serde(default)]
    pub csv_frames: usize,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub experiment: ExperimentParams,
    /// When set, `experiment.r0` is replaced by the squeezing parameter that
    /// yields this low-frequency level (dB) at the configured efficiency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_squeezing_db: Option<f64>,
    pub acquisition: Acquisition,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock: Option<LockConfig>,
    #[serde(default = "default_lock_cycles")]
    pub lock_cycles: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_lock_cycles() -> usize {
    1000
}

impl RunConfig {
    pub fn reference() -> Self {
        Self {
            version: CONFIG_VERSION,
            experiment: ExperimentParams::reference(),
            target_squeezing_db: Some(-4.5),
            acquisition: Acquisition::reference(),
            mode: ModeSpec::reference(),
            analysis: AnalysisConfig::default(),
            lock: None,
            lock_cycles: default_lock_cycles(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.experiment.validate()?;
        self.acquisition.validate()?;
        self.mode.sample(self.acquisition.fs_hz)?;
        if let Some(t) = self.target_squeezing_db {
            if !t.is_finite() {
                return Err(invalid("target_squeezing_db must be finite"));
            }
        }
        if self.acquisition.n_points < 2 * self.analysis.max_lag.max(1) {
            return Err(invalid("n_points must be at least twice max_lag"));
        }
        if let Some(b) = self.analysis.band_limit_hz {
            if !(b > 0.0) {
                return Err(invalid("band_limit_hz must be positive"));
            }
        }
        if let Some(lock) = &self.lock {
            lock.validate()?;
            if self.lock_cycles == 0 {
                return Err(invalid("lock_cycles must be positive"));
            }
        }
        Ok(())
    }

    /// Physical parameters with `r0` solved from the target level and the
    /// lock residual folded into the phase noise.
    pub fn resolve(&self) -> Result<(ExperimentParams, Option<LockResult>)> {
        self.validate()?;
        let mut params = self.experiment.clone();
        let lock = match &self.lock {
            Some(cfg) => {
                let res = simulate_residual_phase(cfg, self.lock_cycles, self.acquisition.seed)?;
                params.phase_rms_rad = params.phase_rms_rad.hypot(res.total_rms_rad);
                Some(res)
            }
            None => None,
        };
        if let Some(target) = self.target_squeezing_db {
            params.r0 = squeezing_for_target_db(params.eta_total()?, target)?;
        }
        params.validate()?;
        Ok((params, lock))
    }

    pub fn analysis_options(&self) -> Result<AnalysisOptions> {
        Ok(AnalysisOptions {
            max_lag: self.analysis.max_lag,
            band_limit_hz: self.analysis.band_limit_hz,
            mode: Some(self.mode.sample(self.acquisition.fs_hz)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = RunConfig::reference();
        let back = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_and_versions_rejected() {
        let mut v: serde_json::Value = serde_json::to_value(RunConfig::reference()).unwrap();
        v["bogus"] = 1.into();
        assert!(RunConfig::from_json(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::to_value(RunConfig::reference()).unwrap();
        v["experiment"]["eta_typo"] = 0.5.into();
        assert!(RunConfig::from_json(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::to_value(RunConfig::reference()).unwrap();
        v["version"] = 2.into();
        assert!(RunConfig::from_json(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::to_value(RunConfig::reference()).unwrap();
        v.as_object_mut().unwrap().remove("version");
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn target_level_sets_r0() {
        let mut cfg = RunConfig::reference();
        cfg.experiment.r0 = 0.1;
        let (p, lock) = cfg.resolve().unwrap();
        assert!(lock.is_none());
        assert!((p.r0 - ExperimentParams::reference().r0).abs() < 1e-12);
    }

    #[test]
    fn lock_adds_phase_noise() {
        let mut cfg = RunConfig::reference();
        cfg.lock = Some(LockConfig::default());
        cfg.lock_cycles = 50;
        let (p, lock) = cfg.resolve().unwrap();
        let lock = lock.unwrap();
        assert!(lock.total_rms_rad > 0.0);
        assert!((p.phase_rms_rad - lock.total_rms_rad).abs() < 1e-15);
    }
}
