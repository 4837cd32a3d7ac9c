use serde::{Deserialize, Serialize};

use super::combo::{ComboLabel, ComboSpec};
use super::fit::FitResult;
use super::mode::ModeSpec;
use super::stats::{combo_statistics, duan_from_stats, ratio_db, AnalysisOptions, AutoCorrelation, ComboStats};
use super::width::correlation_width;
use crate::error::{invalid, Result};
use crate::spectral::Quadrature;
use crate::synth::{FrameKind, FrameSource};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComboReport {
    pub label: ComboLabel,
    pub noise_power_db: f64,
    pub noise_power_se_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_se_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavepacket_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavepacket_se_db: Option<f64>,
    pub autocorrelation: AutoCorrelation,
    /// `None` when the lag range is too short to resolve the half width.
    pub correlation_width_s: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuanReport {
    pub value: f64,
    pub standard_error: f64,
    pub entangled: bool,
    /// `(1 − value)/standard_error`.
    pub margin_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub fs_hz: f64,
    pub n_frames: usize,
    pub n_points: usize,
    pub max_lag: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_limit_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeSpec>,
    pub combos: Vec<ComboReport>,
    /// Shot-noise auto-correlation of the difference combination.
    pub shot_autocorrelation: AutoCorrelation,
    pub shot_correlation_width_s: Option<f64>,
    pub duan: DuanReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
}

impl AnalysisReport {
    pub fn combo(&self, label: ComboLabel) -> Option<&ComboReport> {
        self.combos.iter().find(|c| c.label == label)
    }
}

fn combo_report(label: ComboLabel, s: &ComboStats, r: &ComboStats, fs_hz: f64) -> Result<ComboReport> {
    let (db, se) = ratio_db(s.variance, s.variance_se, r.variance, r.variance_se)?;
    let pair = |a: Option<f64>, ae: Option<f64>, b: Option<f64>, be: Option<f64>| -> Result<(Option<f64>, Option<f64>)> {
        match (a, ae, b, be) {
            (Some(a), Some(ae), Some(b), Some(be)) => {
                let (d, e) = ratio_db(a, ae, b, be)?;
                Ok((Some(d), Some(e)))
            }
            _ => Ok((None, None)),
        }
    };
    let (band_db, band_se_db) = pair(s.band_variance, s.band_variance_se, r.band_variance, r.band_variance_se)?;
    let (wavepacket_db, wavepacket_se_db) = pair(
        s.wavepacket_variance,
        s.wavepacket_variance_se,
        r.wavepacket_variance,
        r.wavepacket_variance_se,
    )?;
    let autocorrelation = AutoCorrelation::from_stats(s, r, fs_hz)?;
    let correlation_width_s = correlation_width(&autocorrelation).ok();
    Ok(ComboReport {
        label,
        noise_power_db: db,
        noise_power_se_db: se,
        band_db,
        band_se_db,
        wavepacket_db,
        wavepacket_se_db,
        autocorrelation,
        correlation_width_s,
    })
}

/// Analyze a complete run: both quadrature configurations against one
/// shot-noise reference. One pass is made over each source.
pub fn analyze_run<A, B, C>(x_signal: &A, p_signal: &B, shot: &C, opts: &AnalysisOptions) -> Result<AnalysisReport>
where
    A: FrameSource,
    B: FrameSource,
    C: FrameSource,
{
    let (mx, mp, ms) = (x_signal.meta(), p_signal.meta(), shot.meta());
    mx.compatible(ms)?;
    mp.compatible(ms)?;
    if mx.kind != FrameKind::Signal || mx.quadrature != Quadrature::X {
        return Err(invalid("first input must be x-quadrature signal frames"));
    }
    if mp.kind != FrameKind::Signal || mp.quadrature != Quadrature::P {
        return Err(invalid("second input must be p-quadrature signal frames"));
    }
    if ms.kind != FrameKind::Shot {
        return Err(invalid("third input must be shot-noise frames"));
    }

    let x_combos = [ComboSpec::new(ComboLabel::XMinus), ComboSpec::new(ComboLabel::XPlus)];
    let p_combos = [ComboSpec::new(ComboLabel::PPlus), ComboSpec::new(ComboLabel::PMinus)];
    // shot channels carry no quadrature label; only the sign matters
    let shot_combos = [ComboSpec::new(ComboLabel::XMinus), ComboSpec::new(ComboLabel::XPlus)];

    let sx = combo_statistics(x_signal, &x_combos, opts)?;
    let sp = combo_statistics(p_signal, &p_combos, opts)?;
    let rs = combo_statistics(shot, &shot_combos, opts)?;
    let (shot_minus, shot_plus) = (&rs[0], &rs[1]);
    let fs = ms.fs_hz;

    let combos = vec![
        combo_report(ComboLabel::XMinus, &sx[0], shot_minus, fs)?,
        combo_report(ComboLabel::XPlus, &sx[1], shot_plus, fs)?,
        combo_report(ComboLabel::PPlus, &sp[0], shot_plus, fs)?,
        combo_report(ComboLabel::PMinus, &sp[1], shot_minus, fs)?,
    ];
    let shot_autocorrelation = AutoCorrelation::from_stats(shot_minus, shot_minus, fs)?;
    let shot_correlation_width_s = correlation_width(&shot_autocorrelation).ok();

    let d = duan_from_stats(&sx[0], shot_minus, &sp[0], shot_plus)?;
    let duan = DuanReport {
        value: d.value,
        standard_error: d.standard_error,
        entangled: d.value < 1.0,
        margin_sigma: (1.0 - d.value) / d.standard_error,
    };

    Ok(AnalysisReport {
        fs_hz: fs,
        n_frames: ms.n_frames,
        n_points: ms.n_points,
        max_lag: opts.max_lag,
        band_limit_hz: opts.band_limit_hz,
        mode: None,
        combos,
        shot_autocorrelation,
        shot_correlation_width_s,
        duan,
        fit: None,
    })
}
