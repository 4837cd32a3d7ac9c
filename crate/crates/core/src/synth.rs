//! Seeded synthesis of two-channel stationary Gaussian traces with a
//! prescribed 2×2 spectral matrix.
//!
//! Each frame is drawn directly on the DFT grid of its own length: one
//! complex circular Gaussian 2-vector per positive-frequency bin, colored by
//! the symmetric square root of the spectral matrix, mirrored to Hermitian
//! symmetry and inverted. Frame `i` draws from ChaCha stream `i` of a key
//! derived from the run seed, so frames can be produced in any order or in
//! parallel with identical output.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::sym2_sqrt;
use crate::spectral::{shot_psd, EprSpectrum, ExperimentParams, Quadrature};

/// Spectral matrices may dip this far below zero before synthesis refuses
/// them.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Signal,
    Shot,
}

/// Sampling and record-length settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Acquisition {
    pub fs_hz: f64,
    pub n_points: usize,
    pub n_frames: usize,
    pub seed: u64,
}

impl Acquisition {
    /// 256 GSa/s, 5000 frames of 5121 points.
    pub fn reference() -> Self {
        Self {
            fs_hz: 256e9,
            n_points: 5121,
            n_frames: 5000,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs_hz > 0.0) || !self.fs_hz.is_finite() {
            return Err(invalid("sampling rate must be positive"));
        }
        if self.n_points < 2 {
            return Err(invalid("frames need at least 2 points"));
        }
        if self.n_frames == 0 {
            return Err(invalid("need at least one frame"));
        }
        Ok(())
    }

    /// Frequency of DFT bin `k` (`k <= n_points/2`).
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.fs_hz / self.n_points as f64
    }
}

/// Metadata shared by every frame of a set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameMeta {
    pub kind: FrameKind,
    pub quadrature: Quadrature,
    pub n_frames: usize,
    pub n_points: usize,
    pub n_channels: usize,
    pub fs_hz: f64,
    pub seed: u64,
}

impl FrameMeta {
    pub fn new(kind: FrameKind, quadrature: Quadrature, acq: &Acquisition) -> Self {
        Self {
            kind,
            quadrature,
            n_frames: acq.n_frames,
            n_points: acq.n_points,
            n_channels: 2,
            fs_hz: acq.fs_hz,
            seed: acq.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels != 2 {
            return Err(invalid(format!("expected 2 channels, got {}", self.n_channels)));
        }
        Acquisition {
            fs_hz: self.fs_hz,
            n_points: self.n_points,
            n_frames: self.n_frames,
            seed: self.seed,
        }
        .validate()
    }

    pub fn frame_len(&self) -> usize {
        self.n_channels * self.n_points
    }

    /// Same sampling grid and frame count.
    pub fn compatible(&self, other: &FrameMeta) -> Result<()> {
        if self.fs_hz != other.fs_hz {
            return Err(invalid(format!(
                "sampling rates differ: {} vs {}",
                self.fs_hz, other.fs_hz
            )));
        }
        if self.n_points != other.n_points || self.n_frames != other.n_frames {
            return Err(invalid(format!(
                "frame dimensions differ: {}x{} vs {}x{}",
                self.n_frames, self.n_points, other.n_frames, other.n_points
            )));
        }
        Ok(())
    }
}

/// Anything that can hand out frames by index.
pub trait FrameSource: Sync {
    fn meta(&self) -> &FrameMeta;

    /// Call `f` with the two channels of frame `index`.
    fn with_frame<R>(&self, index: usize, f: impl FnOnce(&[f64], &[f64]) -> R) -> Result<R>;
}

/// Frames held in memory, ordered frame, channel, point.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSet {
    pub meta: FrameMeta,
    pub data: Vec<f64>,
}

impl FrameSet {
    pub fn new(meta: FrameMeta, data: Vec<f64>) -> Result<Self> {
        meta.validate()?;
        if data.len() != meta.n_frames * meta.frame_len() {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                meta.n_frames * meta.frame_len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("frame data contains non-finite samples".into()));
        }
        Ok(Self { meta, data })
    }

    pub fn channel(&self, frame: usize, channel: usize) -> &[f64] {
        let n = self.meta.n_points;
        let start = frame * self.meta.frame_len() + channel * n;
        &self.data[start..start + n]
    }
}

impl FrameSource for FrameSet {
    fn meta(&self) -> &FrameMeta {
        &self.meta
    }

    fn with_frame<R>(&self, index: usize, f: impl FnOnce(&[f64], &[f64]) -> R) -> Result<R> {
        if index >= self.meta.n_frames {
            return Err(invalid(format!("frame {index} out of range")));
        }
        Ok(f(self.channel(index, 0), self.channel(index, 1)))
    }
}

fn stream_key(seed: u64, kind: FrameKind, quadrature: Quadrature) -> u64 {
    let tag = match (kind, quadrature) {
        (FrameKind::Signal, Quadrature::X) => 1,
        (FrameKind::Signal, Quadrature::P) => 2,
        (FrameKind::Shot, Quadrature::X) => 3,
        (FrameKind::Shot, Quadrature::P) => 4,
    };
    // splitmix64 finalizer
    let mut z = seed ^ (tag as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// On-demand frame generator for a fixed spectral matrix.
pub struct Synthesizer {
    meta: FrameMeta,
    key: u64,
    /// Coloring factor per bin `0..=n/2`.
    colors: Vec<[[f64; 2]; 2]>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Synthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Synthesizer").field("meta", &self.meta).finish()
    }
}

impl Synthesizer {
    /// `psd` maps a frequency in Hz to the symmetric 2×2 level matrix.
    pub fn new(meta: FrameMeta, psd: impl Fn(f64) -> Result<[[f64; 2]; 2]>) -> Result<Self> {
        meta.validate()?;
        let n = meta.n_points;
        let mut colors = Vec::with_capacity(n / 2 + 1);
        for k in 0..=n / 2 {
            let f = k as f64 * meta.fs_hz / n as f64;
            let m = psd(f)?;
            if (m[0][1] - m[1][0]).abs() > PSD_TOLERANCE * (1.0 + m[0][1].abs()) {
                return Err(Error::Model(format!("spectral matrix not symmetric at {f} Hz")));
            }
            let l = sym2_sqrt(m[0][0], m[0][1], m[1][1], PSD_TOLERANCE).map_err(|ev| {
                Error::Model(format!(
                    "spectral matrix not positive semidefinite at {f} Hz (eigenvalue {ev:e})"
                ))
            })?;
            colors.push(l);
        }
        let key = stream_key(meta.seed, meta.kind, meta.quadrature);
        let ifft = FftPlanner::new().plan_fft_inverse(n);
        Ok(Self {
            meta,
            key,
            colors,
            ifft,
        })
    }

    pub fn meta(&self) -> &FrameMeta {
        &self.meta
    }

    /// Fill `ch1` and `ch2` (length `n_points`) with frame `index`.
    pub fn fill_frame(&self, index: usize, ch1: &mut [f64], ch2: &mut [f64]) {
        let n = self.meta.n_points;
        assert!(ch1.len() == n && ch2.len() == n);
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(index as u64);
        let mut normal = || -> f64 { rng.sample(StandardNormal) };

        let amp = (n as f64).sqrt();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        // Pack channel 1 in the real part and channel 2 in the imaginary part.
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let l = &self.colors[0];
        let (z1, z2) = (normal(), normal());
        buf[0] = Complex64::new(amp * (l[0][0] * z1 + l[0][1] * z2), amp * (l[1][0] * z1 + l[1][1] * z2));
        for k in 1..self.colors.len() {
            let l = &self.colors[k];
            let nyquist = 2 * k == n;
            let (z1, z2) = if nyquist {
                (Complex64::new(normal(), 0.0), Complex64::new(normal(), 0.0))
            } else {
                (
                    Complex64::new(normal() * half, normal() * half),
                    Complex64::new(normal() * half, normal() * half),
                )
            };
            let x1 = (z1 * l[0][0] + z2 * l[0][1]) * amp;
            let x2 = (z1 * l[1][0] + z2 * l[1][1]) * amp;
            let i = Complex64::new(0.0, 1.0);
            buf[k] = x1 + i * x2;
            if !nyquist {
                buf[n - k] = x1.conj() + i * x2.conj();
            }
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / n as f64;
        for (t, v) in buf.iter().enumerate() {
            ch1[t] = v.re * scale;
            ch2[t] = v.im * scale;
        }
    }

    /// Materialize every frame, in parallel.
    pub fn materialize(&self) -> FrameSet {
        let n = self.meta.n_points;
        let mut data = vec![0.0; self.meta.n_frames * 2 * n];
        data.par_chunks_mut(2 * n).enumerate().for_each(|(i, chunk)| {
            let (a, b) = chunk.split_at_mut(n);
            self.fill_frame(i, a, b);
        });
        FrameSet {
            meta: self.meta.clone(),
            data,
        }
    }
}

impl FrameSource for Synthesizer {
    fn meta(&self) -> &FrameMeta {
        &self.meta
    }

    fn with_frame<R>(&self, index: usize, f: impl FnOnce(&[f64], &[f64]) -> R) -> Result<R> {
        if index >= self.meta.n_frames {
            return Err(invalid(format!("frame {index} out of range")));
        }
        let n = self.meta.n_points;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        self.fill_frame(index, &mut a, &mut b);
        Ok(f(&a, &b))
    }
}

/// Synthesize a full frame set for an arbitrary spectral matrix.
pub fn synthesize(
    psd: impl Fn(f64) -> Result<[[f64; 2]; 2]>,
    acq: &Acquisition,
    kind: FrameKind,
    quadrature: Quadrature,
) -> Result<FrameSet> {
    acq.validate()?;
    Ok(Synthesizer::new(FrameMeta::new(kind, quadrature, acq), psd)?.materialize())
}

/// Generator for the EPR signal traces of one quadrature configuration.
pub fn signal_source(params: &ExperimentParams, quadrature: Quadrature, acq: &Acquisition) -> Result<Synthesizer> {
    acq.validate()?;
    let spectrum = EprSpectrum::new(params, quadrature)?;
    Synthesizer::new(FrameMeta::new(FrameKind::Signal, quadrature, acq), |f| {
        Ok(spectrum.at(f)?.total())
    })
}

/// Generator for shot-noise reference traces: vacuum through the same chain.
pub fn shot_source(params: &ExperimentParams, quadrature: Quadrature, acq: &Acquisition) -> Result<Synthesizer> {
    acq.validate()?;
    params.validate()?;
    Synthesizer::new(FrameMeta::new(FrameKind::Shot, quadrature, acq), |f| {
        Ok(shot_psd(params, f))
    })
}

pub fn signal_frames(params: &ExperimentParams, quadrature: Quadrature, acq: &Acquisition) -> Result<FrameSet> {
    Ok(signal_source(params, quadrature, acq)?.materialize())
}

pub fn shot_reference(params: &ExperimentParams, acq: &Acquisition) -> Result<FrameSet> {
    Ok(shot_source(params, Quadrature::X, acq)?.materialize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acq(n_points: usize, n_frames: usize) -> Acquisition {
        Acquisition {
            fs_hz: 256e9,
            n_points,
            n_frames,
            seed: 7,
        }
    }

    #[test]
    fn zero_psd_gives_zero_frames() {
        let fs = synthesize(|_| Ok([[0.0; 2]; 2]), &acq(64, 3), FrameKind::Signal, Quadrature::X).unwrap();
        assert!(fs.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn indefinite_psd_is_rejected() {
        let err = synthesize(|_| Ok([[1.0, 2.0], [2.0, 1.0]]), &acq(16, 1), FrameKind::Signal, Quadrature::X);
        assert!(matches!(err, Err(Error::Model(_))));
    }

    #[test]
    fn frames_are_reproducible_and_order_independent() {
        let s = Synthesizer::new(FrameMeta::new(FrameKind::Shot, Quadrature::X, &acq(101, 6)), |_| {
            Ok([[0.5, 0.1], [0.1, 0.5]])
        })
        .unwrap();
        let all = s.materialize();
        let again = s.materialize();
        assert_eq!(all, again);
        let mut a = vec![0.0; 101];
        let mut b = vec![0.0; 101];
        s.fill_frame(4, &mut a, &mut b);
        assert_eq!(a.as_slice(), all.channel(4, 0));
        assert_eq!(b.as_slice(), all.channel(4, 1));
        assert_ne!(all.channel(0, 0), all.channel(1, 0));
    }

    #[test]
    fn even_length_frames() {
        let fs = synthesize(|_| Ok([[0.5, 0.0], [0.0, 0.5]]), &acq(128, 400), FrameKind::Shot, Quadrature::X).unwrap();
        let var = fs.data.iter().map(|v| v * v).sum::<f64>() / fs.data.len() as f64;
        assert!((var - 0.5).abs() < 0.01, "{var}");
    }

    #[test]
    fn distinct_sets_use_distinct_streams() {
        let a = acq(32, 1);
        let x = synthesize(|_| Ok([[0.5, 0.0], [0.0, 0.5]]), &a, FrameKind::Signal, Quadrature::X).unwrap();
        let p = synthesize(|_| Ok([[0.5, 0.0], [0.0, 0.5]]), &a, FrameKind::Signal, Quadrature::P).unwrap();
        assert_ne!(x.data, p.data);
    }

    #[test]
    fn frameset_rejects_bad_input() {
        let meta = FrameMeta::new(FrameKind::Shot, Quadrature::X, &acq(4, 1));
        assert!(FrameSet::new(meta.clone(), vec![0.0; 7]).is_err());
        let mut d = vec![0.0; 8];
        d[3] = f64::NAN;
        assert!(FrameSet::new(meta, d).is_err());
    }
}
