use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeShape {
    /// `t·exp(−(γt)²)`
    PolynomialGaussian,
    /// `(1 + cos(2πγt))/2` on `|t| <= 1/(2γ)`
    RaisedCosine,
    /// Explicit samples on the trace grid.
    CustomTable,
}

/// Configuration of the temporal wavepacket mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub shape: ModeShape,
    #[serde(default)]
    pub gamma_per_s: f64,
    pub period_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
}

impl Default for ModeSpec {
    fn default() -> Self {
        Self::reference()
    }
}

impl ModeSpec {
    /// `t·exp(−(γt)²)` with `γ = 10¹¹ s⁻¹` in 40 ps windows; the mode's
    /// spectrum peaks near 22 GHz and has negligible weight above 66 GHz.
    pub fn reference() -> Self {
        Self {
            shape: ModeShape::PolynomialGaussian,
            gamma_per_s: 1e11,
            period_s: 40e-12,
            table: None,
        }
    }

    /// Sample and normalize on a grid with sampling rate `fs_hz`.
    pub fn sample(&self, fs_hz: f64) -> Result<ModeFunction> {
        if !(self.period_s > 0.0) || !(fs_hz > 0.0) {
            return Err(invalid("mode period and sampling rate must be positive"));
        }
        let len = (self.period_s * fs_hz).round() as usize;
        if len < 2 {
            return Err(invalid(format!(
                "mode period {} s spans fewer than 2 samples at {fs_hz} Hz",
                self.period_s
            )));
        }
        let t = |j: usize| (j as f64 - (len as f64 - 1.0) / 2.0) / fs_hz;
        let raw: Vec<f64> = match self.shape {
            ModeShape::PolynomialGaussian => {
                if !(self.gamma_per_s > 0.0) {
                    return Err(invalid("gamma_per_s must be positive"));
                }
                (0..len)
                    .map(|j| t(j) * (-(self.gamma_per_s * t(j)).powi(2)).exp())
                    .collect()
            }
            ModeShape::RaisedCosine => {
                if !(self.gamma_per_s > 0.0) {
                    return Err(invalid("gamma_per_s must be positive"));
                }
                let width = 1.0 / self.gamma_per_s;
                if width > self.period_s * (1.0 + 1e-12) {
                    return Err(invalid("raised-cosine support 1/gamma exceeds the period"));
                }
                (0..len)
                    .map(|j| {
                        let x = t(j);
                        if x.abs() <= width / 2.0 {
                            0.5 * (1.0 + (2.0 * std::f64::consts::PI * x / width).cos())
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            ModeShape::CustomTable => {
                let table = self
                    .table
                    .as_ref()
                    .ok_or_else(|| invalid("custom-table mode needs a table"))?;
                if table.len() != len {
                    return Err(invalid(format!(
                        "custom table has {} samples, the period spans {len}",
                        table.len()
                    )));
                }
                table.clone()
            }
        };
        ModeFunction::from_samples(raw, fs_hz)
    }
}

/// Unit-norm mode samples on the trace grid; their count is the window
/// stride.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeFunction {
    samples: Vec<f64>,
    fs_hz: f64,
}

impl ModeFunction {
    pub fn from_samples(mut samples: Vec<f64>, fs_hz: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("a mode window needs at least 2 samples"));
        }
        let norm = samples.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("mode function has zero or non-finite norm"));
        }
        samples.iter_mut().for_each(|v| *v /= norm);
        Ok(Self { samples, fs_hz })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn period_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs_hz
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    /// Power spectrum `|Σ m_j e^{−2πi f t_j}|²` of the mode at `f`.
    pub fn power_at(&self, f: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, m) in self.samples.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * f * j as f64 / self.fs_hz;
            re += m * phase.cos();
            im += m * phase.sin();
        }
        re * re + im * im
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mode_is_unit_norm_and_odd() {
        let m = ModeSpec::reference().sample(256e9).unwrap();
        assert_eq!(m.len(), 10);
        let norm: f64 = m.samples().iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-14);
        for j in 0..5 {
            assert!((m.samples()[j] + m.samples()[9 - j]).abs() < 1e-15);
        }
        // spectral weight inside the 66 GHz band
        let total: f64 = (0..2561).map(|k| m.power_at(k as f64 * 0.05e9)).sum();
        let inside: f64 = (0..=1320).map(|k| m.power_at(k as f64 * 0.05e9)).sum();
        assert!(inside / total > 0.99);
    }

    #[test]
    fn raised_cosine_and_table() {
        let rc = ModeSpec {
            shape: ModeShape::RaisedCosine,
            gamma_per_s: 1.0 / 40e-12,
            period_s: 40e-12,
            table: None,
        };
        assert_eq!(rc.sample(256e9).unwrap().len(), 10);
        let wide = ModeSpec { gamma_per_s: 1.0 / 80e-12, ..rc };
        assert!(wide.sample(256e9).is_err());
        let table = ModeSpec {
            shape: ModeShape::CustomTable,
            gamma_per_s: 0.0,
            period_s: 2.0 / 256e9,
            table: Some(vec![3.0, 0.0]),
        };
        assert_eq!(table.sample(256e9).unwrap().samples(), &[1.0, 0.0]);
        let short = ModeSpec { period_s: 1.0 / 256e9, ..table.clone() };
        assert!(short.sample(256e9).is_err());
        let zero = ModeSpec { table: Some(vec![0.0, 0.0]), ..table };
        assert!(zero.sample(256e9).is_err());
    }
}
