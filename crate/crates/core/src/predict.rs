//! Expected analysis results computed directly from the spectral model,
//! without synthesizing traces.
//!
//! Integrals run over the same DFT grid the synthesizer draws on, so a
//! simulate→analyze run converges to these values as the frame count grows.

use serde::{Deserialize, Serialize};

use crate::analysis::{correlation_width, AnalysisOptions, AutoCorrelation, ComboLabel, ComboSpec};
use crate::error::{invalid, Result};
use crate::gaussian::{eta_meas, linear_to_db};
use crate::spectral::{EprSpectrum, ExperimentParams, Quadrature};
use crate::synth::Acquisition;
use crate::SHOT_VARIANCE;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComboPrediction {
    pub label: ComboLabel,
    /// Closed form at f → 0, before filtering and electronic noise.
    pub low_frequency_db: f64,
    /// Variance over the full sampled band.
    pub pointwise_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavepacket_db: Option<f64>,
    pub autocorrelation: AutoCorrelation,
    pub correlation_width_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub gain_db: f64,
    pub r0: f64,
    pub eta_pre: f64,
    pub eta_post: f64,
    pub eta_meas: f64,
    /// Measurement efficiency with the PSA gain set to 1.
    pub eta_meas_no_gain: f64,
    pub eta_total: f64,
    pub combos: Vec<ComboPrediction>,
    pub duan_low_frequency: f64,
    pub duan_pointwise: f64,
}

impl Prediction {
    pub fn combo(&self, label: ComboLabel) -> Option<&ComboPrediction> {
        self.combos.iter().find(|c| c.label == label)
    }
}

/// Level of a stationary series on the two-sided DFT grid, folded to bins
/// `0..=n/2`.
struct Folded {
    n: usize,
    /// `(bin, weight, level)`; weight counts the mirrored bin.
    bins: Vec<(usize, f64, f64)>,
}

impl Folded {
    fn new(n: usize, level: impl Fn(usize) -> Result<f64>) -> Result<Self> {
        let bins = (0..=n / 2)
            .map(|k| {
                let w = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
                Ok((k, w, level(k)?))
            })
            .collect::<Result<_>>()?;
        Ok(Self { n, bins })
    }

    /// `R(τ) = (1/N) Σ_k M(f_k) cos(2πkτ/N)`.
    fn autocov(&self, tau: usize) -> f64 {
        let n = self.n as f64;
        self.bins
            .iter()
            .map(|&(k, w, m)| w * m * (2.0 * std::f64::consts::PI * (k * tau % self.n) as f64 / n).cos())
            .sum::<f64>()
            / n
    }

    fn band(&self, max_bin: usize) -> f64 {
        self.bins.iter().filter(|b| b.0 <= max_bin).map(|&(_, w, m)| w * m).sum::<f64>() / self.n as f64
    }

    fn wavepacket(&self, mode: &[f64]) -> f64 {
        let r: Vec<f64> = (0..mode.len()).map(|t| self.autocov(t)).collect();
        let mut v = 0.0;
        for (j, a) in mode.iter().enumerate() {
            for (l, b) in mode.iter().enumerate() {
                v += a * b * r[j.abs_diff(l)];
            }
        }
        v
    }
}

/// Predict efficiencies and every analysis output for `params` sampled on
/// the grid of `acq`.
pub fn predict(params: &ExperimentParams, acq: &Acquisition, opts: &AnalysisOptions) -> Result<Prediction> {
    params.validate()?;
    acq.validate()?;
    let n = acq.n_points;
    if n < 2 * opts.max_lag.max(1) {
        return Err(invalid("frame too short for the requested lag range"));
    }
    if let Some(mode) = &opts.mode {
        if (mode.fs_hz() - acq.fs_hz).abs() > 1e-9 * acq.fs_hz {
            return Err(invalid("mode function sampled at a different rate than the traces"));
        }
    }
    let max_bin = match opts.band_limit_hz {
        Some(b) if b > 0.0 => Some(((b * n as f64 / acq.fs_hz).floor() as usize).min(n / 2)),
        Some(_) => return Err(invalid("band limit must be positive")),
        None => None,
    };
    let freq = |k: usize| acq.bin_frequency(k);

    let shot = Folded::new(n, |k| Ok(SHOT_VARIANCE * params.chain.power(freq(k)) + params.electronic_noise.level(freq(k))))?;
    let shot_var = shot.autocov(0);
    let shot_band = max_bin.map(|b| shot.band(b));
    let shot_wp = opts.mode.as_ref().map(|m| shot.wavepacket(m.samples()));

    let mut combos = Vec::new();
    let mut low = std::collections::HashMap::new();
    for quadrature in [Quadrature::X, Quadrature::P] {
        let spectrum = EprSpectrum::new(params, quadrature)?;
        let points: Vec<_> = (0..=n / 2).map(|k| spectrum.at(freq(k))).collect::<Result<_>>()?;
        let c0 = spectrum.channel_covariance(params.r0)?;
        for combo in [ComboSpec::squeezed(quadrature), ComboSpec::anti_squeezed(quadrature)] {
            let sign = combo.sign();
            let folded = Folded::new(n, |k| Ok(points[k].combo(sign)))?;
            let low_lin = (0.5 * (c0[0][0] + c0[1][1]) + sign * c0[0][1]) / SHOT_VARIANCE;
            low.insert(combo.label, low_lin);
            let values: Vec<f64> = (0..=opts.max_lag).map(|t| folded.autocov(t) / shot_var).collect();
            let autocorrelation = AutoCorrelation {
                lags_s: (0..=opts.max_lag).map(|t| t as f64 / acq.fs_hz).collect(),
                values,
            };
            combos.push(ComboPrediction {
                label: combo.label,
                low_frequency_db: linear_to_db(low_lin),
                pointwise_db: linear_to_db(autocorrelation.values[0]),
                band_db: max_bin.map(|b| linear_to_db(folded.band(b) / shot_band.unwrap())),
                wavepacket_db: opts
                    .mode
                    .as_ref()
                    .map(|m| linear_to_db(folded.wavepacket(m.samples()) / shot_wp.unwrap())),
                correlation_width_s: correlation_width(&autocorrelation).ok(),
                autocorrelation,
            });
        }
    }
    let pointwise = |l: ComboLabel| {
        combos
            .iter()
            .find(|c| c.label == l)
            .map(|c| c.autocorrelation.values[0])
            .expect("all combos computed")
    };
    let duan_pointwise = 0.5 * (pointwise(ComboLabel::XMinus) + pointwise(ComboLabel::PPlus));
    let duan_low_frequency = 0.5 * (low[&ComboLabel::XMinus] + low[&ComboLabel::PPlus]);

    Ok(Prediction {
        gain_db: params.gain_db,
        r0: params.r0,
        eta_pre: params.eta_pre(),
        eta_post: params.eta_post(),
        eta_meas: params.eta_meas()?,
        eta_meas_no_gain: eta_meas(1.0, params.eta_opa, params.eta_post())?,
        eta_total: params.eta_total()?,
        combos,
        duan_low_frequency,
        duan_pointwise,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gain_db: f64,
    pub eta_meas: f64,
    pub eta_total: f64,
    /// Low-frequency level of `x_minus`, `x_plus`, `p_plus`, `p_minus`.
    pub low_frequency_db: [f64; 4],
    /// Full-band level of the same combinations.
    pub pointwise_db: [f64; 4],
}

/// Predictions at each PSA gain in `gains_db`, other parameters fixed.
pub fn sweep_gain(params: &ExperimentParams, gains_db: &[f64], acq: &Acquisition) -> Result<Vec<SweepRow>> {
    if gains_db.is_empty() {
        return Err(invalid("empty gain list"));
    }
    let opts = AnalysisOptions {
        max_lag: 0,
        band_limit_hz: None,
        mode: None,
    };
    gains_db
        .iter()
        .map(|&g| {
            let p = ExperimentParams {
                gain_db: g,
                ..params.clone()
            };
            let pred = predict(&p, acq, &opts)?;
            let pick = |f: &dyn Fn(&ComboPrediction) -> f64| {
                [ComboLabel::XMinus, ComboLabel::XPlus, ComboLabel::PPlus, ComboLabel::PMinus]
                    .map(|l| f(pred.combo(l).expect("all combos computed")))
            };
            Ok(SweepRow {
                gain_db: g,
                eta_meas: pred.eta_meas,
                eta_total: pred.eta_total,
                low_frequency_db: pick(&|c| c.low_frequency_db),
                pointwise_db: pick(&|c| c.pointwise_db),
            })
        })
        .collect()
}
