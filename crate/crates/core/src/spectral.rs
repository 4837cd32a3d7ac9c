//! Frequency-domain model of the generated and detected quadratures.
//!
//! Spectral levels are expressed in shot-variance units: white vacuum noise
//! reads `1/2` at every frequency, and the variance of a sampled trace is
//! the mean of its level over the discrete frequency grid. Multiply by
//! `2/fs` to get a single-sided density per hertz.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaussian::{db_to_linear, eta_meas, eta_total, GaussianState, PsaParams};
use crate::scalar::Real;
use crate::SHOT_VARIANCE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    OnePoleLowpass,
    BrickwallLowpass,
    /// Gaussian amplitude response; the cutoff is its full width at half
    /// maximum.
    GaussianLowpass,
    OnePoleHighpass,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterStage {
    pub kind: FilterKind,
    pub cutoff_hz: f64,
}

impl FilterStage {
    pub fn new(kind: FilterKind, cutoff_hz: f64) -> Result<Self> {
        let stage = Self { kind, cutoff_hz };
        stage.validate()?;
        Ok(stage)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_hz > 0.0) || !self.cutoff_hz.is_finite() {
            return Err(invalid(format!(
                "filter cutoff must be positive and finite, got {}",
                self.cutoff_hz
            )));
        }
        Ok(())
    }

    /// Complex amplitude response at `f` (Hz, `f >= 0`).
    pub fn response(&self, f: f64) -> Complex64 {
        let u = f / self.cutoff_hz;
        match self.kind {
            FilterKind::OnePoleLowpass => Complex64::new(1.0, 0.0) / Complex64::new(1.0, u),
            FilterKind::BrickwallLowpass => {
                if f <= self.cutoff_hz {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            FilterKind::GaussianLowpass => {
                let sigma = self.cutoff_hz / fwhm_to_sigma_ratio();
                Complex64::new((-0.5 * (f / sigma).powi(2)).exp(), 0.0)
            }
            FilterKind::OnePoleHighpass => Complex64::new(0.0, u) / Complex64::new(1.0, u),
        }
    }
}

/// `FWHM / σ` of a gaussian profile.
fn fwhm_to_sigma_ratio() -> f64 {
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt()
}

/// Ordered cascade of detection filters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransferChain {
    pub stages: Vec<FilterStage>,
}

impl TransferChain {
    pub fn new(stages: Vec<FilterStage>) -> Result<Self> {
        let chain = Self { stages };
        chain.validate()?;
        Ok(chain)
    }

    /// Homodyne detector (70 GHz), RF amplifier (90 kHz to 66 GHz),
    /// 1.85-mm connectors (66 GHz) and oscilloscope front end (113 GHz).
    pub fn default_detection() -> Self {
        use FilterKind::*;
        let stage = |kind, cutoff_hz| FilterStage { kind, cutoff_hz };
        Self {
            stages: vec![
                stage(OnePoleLowpass, 70e9),
                stage(OnePoleHighpass, 90e3),
                stage(OnePoleLowpass, 66e9),
                stage(BrickwallLowpass, 66e9),
                stage(OnePoleLowpass, 113e9),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stages.iter().try_for_each(FilterStage::validate)
    }

    pub fn response(&self, f: f64) -> Complex64 {
        self.stages
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(f))
    }

    /// `|H(f)|²`
    pub fn power(&self, f: f64) -> f64 {
        self.response(f).norm_sqr()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClearancePoint {
    pub freq_hz: f64,
    /// How far the electronic noise sits below the unfiltered shot level.
    pub clearance_db: f64,
}

/// Additive electronic noise, identical in signal and shot-noise runs.
///
/// The clearance is interpolated linearly in dB between table points and
/// held constant outside the table. Two points at the same frequency form a
/// step; frequencies at or above the step take the later value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElectronicNoise {
    pub points: Vec<ClearancePoint>,
}

impl ElectronicNoise {
    pub fn none() -> Self {
        Self { points: Vec::new() }
    }

    /// Flat clearance at every frequency.
    pub fn flat(clearance_db: f64) -> Self {
        Self {
            points: vec![ClearancePoint {
                freq_hz: 0.0,
                clearance_db,
            }],
        }
    }

    /// Detector and amplifier noise 24 dB below shot noise across the 66 GHz
    /// detection band, digitizer noise 16.5 dB below shot noise beyond it.
    ///
    /// Measured against the filtered shot level this keeps more than 23 dB of
    /// clearance up to 20 GHz and more than 17 dB up to 60 GHz.
    pub fn default_detection() -> Self {
        let p = |freq_hz, clearance_db| ClearancePoint {
            freq_hz,
            clearance_db,
        };
        Self {
            points: vec![p(0.0, 24.0), p(66e9, 24.0), p(66e9, 16.5)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if w[1].freq_hz < w[0].freq_hz {
                return Err(invalid("electronic noise table must be sorted by frequency"));
            }
        }
        for p in &self.points {
            if !p.freq_hz.is_finite() || p.freq_hz < 0.0 || !p.clearance_db.is_finite() {
                return Err(invalid("electronic noise table entries must be finite, f >= 0"));
            }
        }
        Ok(())
    }

    /// Clearance in dB at `f`, `None` when there is no electronic noise.
    pub fn clearance_db(&self, f: f64) -> Option<f64> {
        let pts = &self.points;
        let first = pts.first()?;
        let last = pts.last()?;
        if f >= last.freq_hz {
            return Some(last.clearance_db);
        }
        if f <= first.freq_hz {
            return Some(first.clearance_db);
        }
        let i = pts.partition_point(|p| p.freq_hz <= f);
        let (a, b) = (pts[i - 1], pts[i]);
        let w = (f - a.freq_hz) / (b.freq_hz - a.freq_hz);
        Some(a.clearance_db + w * (b.clearance_db - a.clearance_db))
    }

    /// Noise level in shot-variance units at `f`.
    pub fn level(&self, f: f64) -> f64 {
        self.clearance_db(f)
            .map_or(0.0, |c| SHOT_VARIANCE * db_to_linear(-c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    /// Angle of the amplified and measured quadrature.
    pub fn angle(self) -> f64 {
        match self {
            Quadrature::X => 0.0,
            Quadrature::P => std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quadrature::X => "x",
            Quadrature::P => "p",
        }
    }
}

/// Physical parameters of the generation and measurement chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    /// Peak squeezing parameter of each generation OPA.
    pub r0: f64,
    /// FWHM of the squeezing-parameter roll-off.
    pub opa_fwhm_hz: f64,
    pub eta_state: f64,
    pub eta_opa: f64,
    pub eta_hd: f64,
    /// Unattributed efficiency factor applied together with `eta_hd`.
    pub eta_extra: f64,
    pub gain_db: f64,
    /// Residual phase error between the amplified quadrature and the LO.
    #[serde(default)]
    pub phase_rms_rad: f64,
    pub chain: TransferChain,
    pub electronic_noise: ElectronicNoise,
}

impl ExperimentParams {
    /// Nominal experiment: 94% state preparation, 76% measurement efficiency
    /// at 25 dB PSA gain (19% without gain) and 4.5 dB of detected squeezing
    /// at low frequency.
    pub fn reference() -> Self {
        let mut p = Self {
            r0: 0.0,
            opa_fwhm_hz: 6e12,
            eta_state: 0.94,
            eta_opa: 0.767,
            eta_hd: 0.36,
            eta_extra: 2.0 / 3.0,
            gain_db: 25.0,
            phase_rms_rad: 0.0,
            chain: TransferChain::default_detection(),
            electronic_noise: ElectronicNoise::default_detection(),
        };
        let eta = p.eta_total().expect("defaults are valid");
        p.r0 = crate::gaussian::squeezing_for_target_db(eta, -4.5).expect("reachable");
        p
    }

    /// Lossless, unamplified, unfiltered and noiseless chain.
    pub fn ideal(r0: f64) -> Self {
        Self {
            r0,
            opa_fwhm_hz: 6e12,
            eta_state: 1.0,
            eta_opa: 1.0,
            eta_hd: 1.0,
            eta_extra: 1.0,
            gain_db: 0.0,
            phase_rms_rad: 0.0,
            chain: TransferChain::default(),
            electronic_noise: ElectronicNoise::none(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 >= 0.0) || !self.r0.is_finite() {
            return Err(invalid(format!("r0 must be finite and >= 0, got {}", self.r0)));
        }
        if !(self.opa_fwhm_hz > 0.0) {
            return Err(invalid("opa_fwhm_hz must be positive"));
        }
        for (name, v) in [
            ("eta_state", self.eta_state),
            ("eta_opa", self.eta_opa),
            ("eta_hd", self.eta_hd),
            ("eta_extra", self.eta_extra),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.gain_db >= 0.0) || !self.gain_db.is_finite() {
            return Err(invalid(format!("gain_db must be finite and >= 0, got {}", self.gain_db)));
        }
        if !(self.phase_rms_rad >= 0.0) || !self.phase_rms_rad.is_finite() {
            return Err(invalid("phase_rms_rad must be finite and >= 0"));
        }
        self.chain.validate()?;
        self.electronic_noise.validate()
    }

    pub fn gain_linear(&self) -> f64 {
        db_to_linear(self.gain_db)
    }

    /// Detector-side efficiency `η_HD·η_extra`.
    pub fn eta_post(&self) -> f64 {
        self.eta_hd * self.eta_extra
    }

    /// Efficiency up to the PSA input, `η_state·η_OPA`.
    pub fn eta_pre(&self) -> f64 {
        self.eta_state * self.eta_opa
    }

    pub fn eta_meas(&self) -> Result<f64> {
        eta_meas(self.gain_linear(), self.eta_opa, self.eta_post())
    }

    pub fn eta_total(&self) -> Result<f64> {
        eta_total(self.eta_state, self.eta_meas()?)
    }
}

/// Squeezed and anti-squeezed variances (shot units) at `f` for a gaussian
/// roll-off of the squeezing parameter with full width `fwhm`.
pub fn squeezing_spectrum<T: Real>(r0: T, fwhm: T, f: T) -> (T, T) {
    let r = squeezing_parameter(r0, fwhm, f);
    ((-T::two() * r).exp(), (T::two() * r).exp())
}

/// `r(f) = r0·exp(−(f/σ)²/2)` with `σ = FWHM/(2√(2 ln 2))`.
pub fn squeezing_parameter<T: Real>(r0: T, fwhm: T, f: T) -> T {
    let sigma = fwhm / T::lit(fwhm_to_sigma_ratio());
    r0 * (-T::half() * (f / sigma).powi(2)).exp()
}

/// Spectral content of the two detected channels at one frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdPoint {
    /// Optical 2×2 level after the filter chain, without electronic noise.
    pub optical: [[f64; 2]; 2],
    /// Filtered vacuum level of one channel.
    pub shot: f64,
    /// Electronic noise added to each channel (uncorrelated).
    pub floor: f64,
}

impl PsdPoint {
    pub fn total(&self) -> [[f64; 2]; 2] {
        let o = self.optical;
        [[o[0][0] + self.floor, o[0][1]], [o[1][0], o[1][1] + self.floor]]
    }

    pub fn shot_total(&self) -> f64 {
        self.shot + self.floor
    }

    /// Level of `(q1 + sign·q2)/√2` including electronic noise.
    pub fn combo(&self, sign: f64) -> f64 {
        let t = self.total();
        0.5 * (t[0][0] + t[1][1]) + sign * t[0][1]
    }
}

/// Per-frequency PSD of the two channels measuring `quadrature` on the two
/// EPR modes.
#[derive(Clone, Debug)]
pub struct EprSpectrum {
    params: ExperimentParams,
    quadrature: Quadrature,
    psa: PsaParams<f64>,
    shot_scale: f64,
}

impl EprSpectrum {
    pub fn new(params: &ExperimentParams, quadrature: Quadrature) -> Result<Self> {
        params.validate()?;
        let psa = PsaParams::new(params.gain_linear(), quadrature.angle(), params.eta_opa)?;
        let mut spectrum = Self {
            params: params.clone(),
            quadrature,
            psa,
            shot_scale: 1.0,
        };
        let vac = spectrum.measure(GaussianState::vacuum(2)?)?;
        let v = vac.quadrature_variance(0, quadrature.angle())?;
        spectrum.shot_scale = SHOT_VARIANCE / v;
        Ok(spectrum)
    }

    pub fn params(&self) -> &ExperimentParams {
        &self.params
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    /// State loss, phase noise, PSA and detector loss on both modes.
    fn measure(&self, state: GaussianState<f64>) -> Result<GaussianState<f64>> {
        let p = &self.params;
        let mut s = state;
        for mode in 0..2 {
            s = s
                .apply_loss(mode, p.eta_state)?
                .apply_phase_noise(mode, p.phase_rms_rad)?
                .apply_psa(mode, &self.psa)?
                .apply_loss(mode, p.eta_post())?;
        }
        Ok(s)
    }

    /// Normalized 2×2 covariance of the measured quadratures before
    /// filtering, at squeezing parameter `r`.
    pub fn channel_covariance(&self, r: f64) -> Result<[[f64; 2]; 2]> {
        let s = self.measure(GaussianState::epr(r)?)?;
        let (a, b) = match self.quadrature {
            Quadrature::X => (0, 2),
            Quadrature::P => (1, 3),
        };
        let c = s.cov();
        let k = self.shot_scale;
        Ok([[k * c[(a, a)], k * c[(a, b)]], [k * c[(b, a)], k * c[(b, b)]]])
    }

    pub fn at(&self, f: f64) -> Result<PsdPoint> {
        if !(f >= 0.0) {
            return Err(invalid(format!("frequency must be >= 0, got {f}")));
        }
        let p = &self.params;
        let r = squeezing_parameter(p.r0, p.opa_fwhm_hz, f);
        let h2 = p.chain.power(f);
        let cov = self.channel_covariance(r)?;
        Ok(PsdPoint {
            optical: [[h2 * cov[0][0], h2 * cov[0][1]], [h2 * cov[1][0], h2 * cov[1][1]]],
            shot: h2 * SHOT_VARIANCE,
            floor: p.electronic_noise.level(f),
        })
    }
}

/// Vacuum through the same chain: filtered shot level plus electronic noise,
/// uncorrelated between channels.
pub fn shot_psd(params: &ExperimentParams, f: f64) -> [[f64; 2]; 2] {
    let level = SHOT_VARIANCE * params.chain.power(f) + params.electronic_noise.level(f);
    [[level, 0.0], [0.0, level]]
}

/// Convenience wrapper around [`EprSpectrum::at`].
pub fn epr_psd(params: &ExperimentParams, quadrature: Quadrature, f: f64) -> Result<PsdPoint> {
    EprSpectrum::new(params, quadrature)?.at(f)
}
