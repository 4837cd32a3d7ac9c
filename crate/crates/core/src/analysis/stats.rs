use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::combo::ComboSpec;
use super::mode::ModeFunction;
use crate::error::{invalid, Error, Result};
use crate::gaussian::linear_to_db;
use crate::synth::{FrameKind, FrameSource};

/// Below this the shot reference is treated as absent.
const DEGENERATE_SHOT: f64 = 1e-30;

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    /// Largest auto-correlation lag, in samples.
    pub max_lag: usize,
    /// Also report the variance restricted to `|f| <= band_limit_hz`.
    pub band_limit_hz: Option<f64>,
    pub mode: Option<ModeFunction>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            max_lag: 40,
            band_limit_hz: None,
            mode: None,
        }
    }
}

/// Pooled statistics of one combination over every frame of a source.
#[derive(Clone, Debug, PartialEq)]
pub struct ComboStats {
    pub n_frames: usize,
    pub n_samples: usize,
    pub mean: f64,
    /// Pooled variance (biased, pooled mean removed).
    pub variance: f64,
    /// Standard error of `variance` from the spread of per-frame estimates.
    pub variance_se: f64,
    /// Biased auto-covariance for lags `0..=max_lag`; entry 0 is `variance`.
    pub autocov: Vec<f64>,
    pub band_variance: Option<f64>,
    pub band_variance_se: Option<f64>,
    pub wavepacket_variance: Option<f64>,
    pub wavepacket_variance_se: Option<f64>,
    pub n_windows: usize,
}

#[derive(Clone, Debug, Default)]
struct FrameAccum {
    n: usize,
    sum: f64,
    lag: Vec<f64>,
    head: Vec<f64>,
    tail: Vec<f64>,
    band: f64,
    wp_n: usize,
    wp_sum: f64,
    wp_sumsq: f64,
}

fn accumulate_frame(
    y: &[f64],
    max_lag: usize,
    mode: Option<&ModeFunction>,
) -> FrameAccum {
    let n = y.len();
    let mut acc = FrameAccum {
        n,
        sum: y.iter().sum(),
        lag: Vec::with_capacity(max_lag + 1),
        head: Vec::with_capacity(max_lag + 1),
        tail: Vec::with_capacity(max_lag + 1),
        ..Default::default()
    };
    for tau in 0..=max_lag {
        let m = n - tau;
        acc.lag.push(y[..m].iter().zip(&y[tau..]).map(|(a, b)| a * b).sum());
        acc.head.push(y[..m].iter().sum());
        acc.tail.push(y[tau..].iter().sum());
    }
    if let Some(mode) = mode {
        let w = mode.samples();
        for window in y.chunks_exact(w.len()) {
            let q: f64 = window.iter().zip(w).map(|(a, b)| a * b).sum();
            acc.wp_n += 1;
            acc.wp_sum += q;
            acc.wp_sumsq += q * q;
        }
    }
    acc
}

fn standard_error(values: &[f64], fallback: f64) -> f64 {
    let k = values.len();
    if k < 2 {
        return fallback;
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

/// In-band mean square (DC included) of two real series packed as `a + i·b`.
fn band_powers(
    fft: &dyn Fft<f64>,
    a: &[f64],
    b: &[f64],
    n_band: usize,
) -> (f64, f64) {
    let n = a.len();
    let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
    fft.process(&mut buf);
    let (mut pa, mut pb) = (buf[0].re.powi(2), buf[0].im.powi(2));
    for k in 1..=n_band {
        let z = buf[k];
        let zc = buf[n - k].conj();
        let ya = (z + zc) * 0.5;
        let yb = (z - zc) * Complex64::new(0.0, -0.5);
        // bins k and n − k both lie in the band
        let weight = if 2 * k == n { 1.0 } else { 2.0 };
        pa += weight * ya.norm_sqr();
        pb += weight * yb.norm_sqr();
    }
    let scale = 1.0 / (n as f64 * n as f64);
    (pa * scale, pb * scale)
}

/// Pooled statistics for every combination in `combos`, in one pass over the
/// frames. Output does not depend on the number of worker threads.
pub fn combo_statistics<S: FrameSource>(
    source: &S,
    combos: &[ComboSpec],
    opts: &AnalysisOptions,
) -> Result<Vec<ComboStats>> {
    let meta = source.meta().clone();
    meta.validate()?;
    let n = meta.n_points;
    if combos.is_empty() {
        return Err(invalid("no combinations requested"));
    }
    if n < 2 * opts.max_lag.max(1) {
        return Err(invalid(format!(
            "{} points per frame cannot support lags up to {}",
            n, opts.max_lag
        )));
    }
    if let Some(mode) = &opts.mode {
        if (mode.fs_hz() - meta.fs_hz).abs() > 1e-9 * meta.fs_hz {
            return Err(invalid("mode function sampled at a different rate than the traces"));
        }
        if mode.len() > n {
            return Err(invalid("mode window longer than a frame"));
        }
    }
    let band = match opts.band_limit_hz {
        Some(b) if b > 0.0 => {
            let bins = ((b * n as f64 / meta.fs_hz).floor() as usize).min(n / 2);
            Some((FftPlanner::new().plan_fft_forward(n), bins))
        }
        Some(_) => return Err(invalid("band limit must be positive")),
        None => None,
    };
    let band: Option<(Arc<dyn Fft<f64>>, usize)> = band;

    let per_frame: Vec<Vec<FrameAccum>> = (0..meta.n_frames)
        .into_par_iter()
        .map(|i| {
            source.with_frame(i, |a, b| {
                let series: Vec<Vec<f64>> = combos
                    .iter()
                    .map(|c| a.iter().zip(b).map(|(&u, &v)| c.apply(u, v)).collect())
                    .collect();
                let mut accs: Vec<FrameAccum> = series
                    .iter()
                    .map(|y| accumulate_frame(y, opts.max_lag, opts.mode.as_ref()))
                    .collect();
                if let Some((fft, bins)) = &band {
                    for pair in (0..series.len()).collect::<Vec<_>>().chunks(2) {
                        let first = &series[pair[0]];
                        let second = pair.get(1).map(|&j| series[j].as_slice()).unwrap_or(first);
                        let (pa, pb) = band_powers(fft.as_ref(), first, second, *bins);
                        accs[pair[0]].band = pa;
                        if let Some(&j) = pair.get(1) {
                            accs[j].band = pb;
                        }
                    }
                }
                accs
            })
        })
        .collect::<Result<_>>()?;

    let n_frames = meta.n_frames;
    let mut out = Vec::with_capacity(combos.len());
    for c in 0..combos.len() {
        let frames: Vec<&FrameAccum> = per_frame.iter().map(|f| &f[c]).collect();
        let total_n: usize = frames.iter().map(|f| f.n).sum();
        let mean = frames.iter().map(|f| f.sum).sum::<f64>() / total_n as f64;
        let mut autocov = vec![0.0; opts.max_lag + 1];
        let mut frame_vars = Vec::with_capacity(n_frames);
        for f in &frames {
            for tau in 0..=opts.max_lag {
                let m = (f.n - tau) as f64;
                autocov[tau] += f.lag[tau] - mean * (f.head[tau] + f.tail[tau]) + m * mean * mean;
            }
            let nf = f.n as f64;
            frame_vars.push((f.lag[0] - 2.0 * mean * f.sum + nf * mean * mean) / nf);
        }
        autocov.iter_mut().for_each(|v| *v /= total_n as f64);
        let variance = autocov[0];
        let variance_se = standard_error(&frame_vars, variance * (2.0 / total_n as f64).sqrt());

        let (band_variance, band_variance_se) = if band.is_some() {
            let vals: Vec<f64> = frames.iter().map(|f| f.band).collect();
            let v = vals.iter().sum::<f64>() / n_frames as f64 - mean * mean;
            (Some(v), Some(standard_error(&vals, v * (2.0 / total_n as f64).sqrt())))
        } else {
            (None, None)
        };

        let (wavepacket_variance, wavepacket_variance_se, n_windows) = if opts.mode.is_some() {
            let wn: usize = frames.iter().map(|f| f.wp_n).sum();
            let wmean = frames.iter().map(|f| f.wp_sum).sum::<f64>() / wn as f64;
            let wvar = frames.iter().map(|f| f.wp_sumsq).sum::<f64>() / wn as f64 - wmean * wmean;
            let per: Vec<f64> = frames
                .iter()
                .map(|f| {
                    let k = f.wp_n as f64;
                    (f.wp_sumsq - 2.0 * wmean * f.wp_sum + k * wmean * wmean) / k
                })
                .collect();
            let se = standard_error(&per, wvar * (2.0 / wn as f64).sqrt());
            (Some(wvar), Some(se), wn)
        } else {
            (None, None, 0)
        };

        out.push(ComboStats {
            n_frames,
            n_samples: total_n,
            mean,
            variance,
            variance_se,
            autocov,
            band_variance,
            band_variance_se,
            wavepacket_variance,
            wavepacket_variance_se,
            n_windows,
        });
    }
    Ok(out)
}

/// `10·log10(signal/shot)` with its propagated standard error.
pub fn ratio_db(signal: f64, signal_se: f64, shot: f64, shot_se: f64) -> Result<(f64, f64)> {
    if !(shot > DEGENERATE_SHOT) {
        return Err(Error::DegenerateReference(shot));
    }
    let rel = ((signal_se / signal).powi(2) + (shot_se / shot).powi(2)).sqrt();
    Ok((linear_to_db(signal / shot), 10.0 / std::f64::consts::LN_10 * rel))
}

fn check_pair<A: FrameSource, B: FrameSource>(signal: &A, shot: &B, combo: &ComboSpec) -> Result<()> {
    signal.meta().compatible(shot.meta())?;
    let m = signal.meta();
    if m.kind == FrameKind::Signal && m.quadrature != combo.quadrature() {
        return Err(invalid(format!(
            "{} traces cannot form {}",
            m.quadrature.label(),
            combo.label.as_str()
        )));
    }
    Ok(())
}

fn single<S: FrameSource>(source: &S, combo: ComboSpec, opts: &AnalysisOptions) -> Result<ComboStats> {
    Ok(combo_statistics(source, &[combo], opts)?.remove(0))
}

/// Pointwise noise power of `combo` relative to the shot-noise traces, in dB.
pub fn noise_power_db<A: FrameSource, B: FrameSource>(signal: &A, shot: &B, combo: ComboSpec) -> Result<f64> {
    check_pair(signal, shot, &combo)?;
    let opts = AnalysisOptions {
        max_lag: 0,
        ..Default::default()
    };
    let s = single(signal, combo, &opts)?;
    let r = single(shot, combo, &opts)?;
    Ok(ratio_db(s.variance, s.variance_se, r.variance, r.variance_se)?.0)
}

/// Auto-correlation normalized to the shot-noise variance at zero lag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoCorrelation {
    pub lags_s: Vec<f64>,
    pub values: Vec<f64>,
}

impl AutoCorrelation {
    pub fn from_stats(signal: &ComboStats, shot: &ComboStats, fs_hz: f64) -> Result<Self> {
        if !(shot.variance > DEGENERATE_SHOT) {
            return Err(Error::DegenerateReference(shot.variance));
        }
        Ok(Self {
            lags_s: (0..signal.autocov.len()).map(|k| k as f64 / fs_hz).collect(),
            values: signal.autocov.iter().map(|v| v / shot.variance).collect(),
        })
    }

    /// Zero-lag value in dB; identical to the pointwise noise power.
    pub fn zero_lag_db(&self) -> f64 {
        linear_to_db(self.values[0])
    }
}

pub fn autocorrelation<A: FrameSource, B: FrameSource>(
    signal: &A,
    shot: &B,
    combo: ComboSpec,
    max_lag: usize,
) -> Result<AutoCorrelation> {
    check_pair(signal, shot, &combo)?;
    let opts = AnalysisOptions {
        max_lag,
        ..Default::default()
    };
    let s = single(signal, combo, &opts)?;
    let r = single(shot, combo, &AnalysisOptions { max_lag: 0, ..Default::default() })?;
    AutoCorrelation::from_stats(&s, &r, signal.meta().fs_hz)
}

/// Per-window mode amplitudes `Σ_j m_j y_{wL+j}` of one frame.
pub fn wavepacket_quadrature<S: FrameSource>(
    source: &S,
    frame: usize,
    combo: ComboSpec,
    mode: &ModeFunction,
) -> Result<Vec<f64>> {
    source.with_frame(frame, |a, b| {
        let y: Vec<f64> = a.iter().zip(b).map(|(&u, &v)| combo.apply(u, v)).collect();
        y.chunks_exact(mode.len())
            .map(|w| w.iter().zip(mode.samples()).map(|(p, q)| p * q).sum())
            .collect()
    })
}

/// Variance of the wavepacket-mode amplitudes relative to shot noise, in dB.
pub fn wavepacket_db<A: FrameSource, B: FrameSource>(
    signal: &A,
    shot: &B,
    combo: ComboSpec,
    mode: &ModeFunction,
) -> Result<f64> {
    check_pair(signal, shot, &combo)?;
    let opts = AnalysisOptions {
        max_lag: 0,
        band_limit_hz: None,
        mode: Some(mode.clone()),
    };
    let s = single(signal, combo, &opts)?;
    let r = single(shot, combo, &opts)?;
    let (sv, sse) = (s.wavepacket_variance.unwrap(), s.wavepacket_variance_se.unwrap());
    let (rv, rse) = (r.wavepacket_variance.unwrap(), r.wavepacket_variance_se.unwrap());
    Ok(ratio_db(sv, sse, rv, rse)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuanValue {
    pub value: f64,
    pub standard_error: f64,
}

/// `Var(x₋)/shot·½ + Var(p₊)/shot·½`: the Duan sum in absolute units,
/// below 1 for entangled states.
pub fn duan_from_traces<A, B, C>(x_signal: &A, p_signal: &B, shot: &C) -> Result<DuanValue>
where
    A: FrameSource,
    B: FrameSource,
    C: FrameSource,
{
    let xm = ComboSpec::squeezed(crate::spectral::Quadrature::X);
    let pp = ComboSpec::squeezed(crate::spectral::Quadrature::P);
    check_pair(x_signal, shot, &xm)?;
    check_pair(p_signal, shot, &pp)?;
    let opts = AnalysisOptions {
        max_lag: 0,
        ..Default::default()
    };
    let sx = single(x_signal, xm, &opts)?;
    let sp = single(p_signal, pp, &opts)?;
    let rx = single(shot, xm, &opts)?;
    let rp = single(shot, pp, &opts)?;
    duan_from_stats(&sx, &rx, &sp, &rp)
}

pub(crate) fn duan_from_stats(sx: &ComboStats, rx: &ComboStats, sp: &ComboStats, rp: &ComboStats) -> Result<DuanValue> {
    let ratio = |s: &ComboStats, r: &ComboStats| -> Result<(f64, f64)> {
        if !(r.variance > DEGENERATE_SHOT) {
            return Err(Error::DegenerateReference(r.variance));
        }
        let q = s.variance / r.variance;
        let rel = ((s.variance_se / s.variance).powi(2) + (r.variance_se / r.variance).powi(2)).sqrt();
        Ok((q, q * rel))
    };
    let (qx, ex) = ratio(sx, rx)?;
    let (qp, ep) = ratio(sp, rp)?;
    Ok(DuanValue {
        value: 0.5 * (qx + qp),
        standard_error: 0.5 * (ex * ex + ep * ep).sqrt(),
    })
}
