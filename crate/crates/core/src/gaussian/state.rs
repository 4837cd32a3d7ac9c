use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

/// Phase-sensitive amplifier: intrinsic loss `eta_opa` followed by gain `gain`
/// on the quadrature at angle `phase` (and `1/gain` on the orthogonal one).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsaParams<T> {
    pub gain: T,
    pub phase: T,
    pub eta_opa: T,
}

impl<T: Real> PsaParams<T> {
    pub fn new(gain: T, phase: T, eta_opa: T) -> Result<Self> {
        let p = Self {
            gain,
            phase,
            eta_opa,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= T::one()) || self.gain.is_infinite() {
            return Err(invalid(format!("PSA gain must be finite and >= 1, got {}", self.gain)));
        }
        if !(self.eta_opa >= T::zero() && self.eta_opa <= T::one()) {
            return Err(invalid(format!("eta_opa must lie in [0, 1], got {}", self.eta_opa)));
        }
        if !self.phase.is_finite() {
            return Err(invalid("PSA phase must be finite"));
        }
        Ok(())
    }
}

/// First and second moments of an `n`-mode Gaussian state.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState<T> {
    n_modes: usize,
    mean: Vec<T>,
    cov: Mat<T>,
}

fn rotation<T: Real>(angle: T) -> Mat<T> {
    let (s, c) = angle.sin_cos();
    Mat::from_rows(&[&[c, -s], &[s, c]])
}

/// `R(θ) diag(a, b) R(θ)ᵀ`
fn stretch_along<T: Real>(theta: T, along: T, across: T) -> Mat<T> {
    let (s, c) = theta.sin_cos();
    let xx = along * c * c + across * s * s;
    let pp = along * s * s + across * c * c;
    let xp = (along - across) * s * c;
    Mat::from_rows(&[&[xx, xp], &[xp, pp]])
}

impl<T: Real> GaussianState<T> {
    /// `n_modes` vacua: zero mean, covariance `I/2`.
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid("a state needs at least one mode"));
        }
        Ok(Self {
            n_modes,
            mean: vec![T::zero(); 2 * n_modes],
            cov: Mat::scaled_identity(2 * n_modes, T::half()),
        })
    }

    /// Build from explicit moments; validates symmetry and the uncertainty
    /// relation.
    pub fn from_moments(mean: Vec<T>, cov: Mat<T>) -> Result<Self> {
        if cov.dim() == 0 || cov.dim() % 2 != 0 || mean.len() != cov.dim() {
            return Err(invalid("mean and covariance must have matching even dimension"));
        }
        let state = Self {
            n_modes: cov.dim() / 2,
            mean,
            cov,
        };
        state.check_physical()?;
        Ok(state)
    }

    /// Two-mode squeezed (EPR) state: an x-squeezed and a p-squeezed vacuum
    /// with the same `r`, mixed on a balanced beamsplitter.
    pub fn epr(r: T) -> Result<Self> {
        Self::vacuum(2)?
            .apply_squeezer(0, r, T::zero())?
            .apply_squeezer(1, r, T::FRAC_PI_2())?
            .apply_beamsplitter(0, 1, T::half(), T::zero())
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Mat<T> {
        &self.cov
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(invalid(format!(
                "mode {mode} out of range for a {}-mode state",
                self.n_modes
            )));
        }
        Ok(())
    }

    fn transform(mut self, idx: &[usize], s: &Mat<T>) -> Self {
        self.cov.congruence_on(idx, s);
        let old: Vec<T> = idx.iter().map(|&i| self.mean[i]).collect();
        for (a, &i) in idx.iter().enumerate() {
            self.mean[i] = (0..idx.len()).fold(T::zero(), |acc, b| acc + s[(a, b)] * old[b]);
        }
        self
    }

    /// Squeeze `mode` so that the variance along `theta` shrinks by `e^{−2r}`.
    pub fn apply_squeezer(self, mode: usize, r: T, theta: T) -> Result<Self> {
        self.check_mode(mode)?;
        if !(r >= T::zero()) || !r.is_finite() {
            return Err(invalid(format!(
                "squeezing parameter must be finite and >= 0, got {r} (rotate theta by pi/2 instead)"
            )));
        }
        let s = stretch_along(theta, (-r).exp(), r.exp());
        Ok(self.transform(&[2 * mode, 2 * mode + 1], &s))
    }

    /// Phase-space rotation of `mode` by `angle`.
    pub fn apply_rotation(self, mode: usize, angle: T) -> Result<Self> {
        self.check_mode(mode)?;
        Ok(self.transform(&[2 * mode, 2 * mode + 1], &rotation(angle)))
    }

    /// Beamsplitter with power transmissivity `t`; `phase` is a phase shift
    /// applied to `mode_j` before mixing.
    pub fn apply_beamsplitter(self, mode_i: usize, mode_j: usize, t: T, phase: T) -> Result<Self> {
        self.check_mode(mode_i)?;
        self.check_mode(mode_j)?;
        if mode_i == mode_j {
            return Err(invalid("beamsplitter needs two distinct modes"));
        }
        if !(t >= T::zero() && t <= T::one()) {
            return Err(invalid(format!("transmissivity must lie in [0, 1], got {t}")));
        }
        let tau = t.sqrt();
        let rho = (T::one() - t).sqrt();
        let (s, c) = phase.sin_cos();
        let z = T::zero();
        // mix · (I ⊕ R(phase)) on (x_i, p_i, x_j, p_j)
        let m = Mat::from_rows(&[
            &[tau, z, rho * c, -rho * s],
            &[z, tau, rho * s, rho * c],
            &[-rho, z, tau * c, -tau * s],
            &[z, -rho, tau * s, tau * c],
        ]);
        Ok(self.transform(&[2 * mode_i, 2 * mode_i + 1, 2 * mode_j, 2 * mode_j + 1], &m))
    }

    /// Pure-loss channel with transmission `eta` on `mode`.
    pub fn apply_loss(mut self, mode: usize, eta: T) -> Result<Self> {
        self.check_mode(mode)?;
        if !(eta >= T::zero() && eta <= T::one()) {
            return Err(invalid(format!("loss transmission must lie in [0, 1], got {eta}")));
        }
        let k = eta.sqrt();
        let (a, b) = (2 * mode, 2 * mode + 1);
        for i in [a, b] {
            self.mean[i] = self.mean[i] * k;
        }
        let n = self.cov.dim();
        for i in [a, b] {
            for j in 0..n {
                if j != a && j != b {
                    self.cov[(i, j)] = self.cov[(i, j)] * k;
                    self.cov[(j, i)] = self.cov[(j, i)] * k;
                }
            }
        }
        let noise = (T::one() - eta) * T::half();
        for i in [a, b] {
            for j in [a, b] {
                self.cov[(i, j)] = eta * self.cov[(i, j)] + if i == j { noise } else { T::zero() };
            }
        }
        Ok(self)
    }

    /// Phase-sensitive amplification: OPA loss first, then gain along
    /// `params.phase`.
    pub fn apply_psa(self, mode: usize, params: &PsaParams<T>) -> Result<Self> {
        params.validate()?;
        let lossy = self.apply_loss(mode, params.eta_opa)?;
        let g = params.gain.sqrt();
        let s = stretch_along(params.phase, g, T::one() / g);
        Ok(lossy.transform(&[2 * mode, 2 * mode + 1], &s))
    }

    /// Second moments after a random phase rotation of `mode` drawn from a
    /// zero-mean normal distribution with standard deviation `sigma`.
    ///
    /// The result is the phase-averaged covariance; the averaged state is
    /// not Gaussian, but every quantity computed here only uses second
    /// moments.
    pub fn apply_phase_noise(mut self, mode: usize, sigma: T) -> Result<Self> {
        self.check_mode(mode)?;
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(invalid(format!("phase noise rms must be finite and >= 0, got {sigma}")));
        }
        let var = sigma * sigma;
        let first = (-var * T::half()).exp(); // E[cos φ]
        let second = (-T::two() * var).exp(); // E[cos 2φ]
        let (a, b) = (2 * mode, 2 * mode + 1);
        for i in [a, b] {
            self.mean[i] = self.mean[i] * first;
        }
        let n = self.cov.dim();
        for i in [a, b] {
            for j in 0..n {
                if j != a && j != b {
                    self.cov[(i, j)] = self.cov[(i, j)] * first;
                    self.cov[(j, i)] = self.cov[(j, i)] * first;
                }
            }
        }
        let (xx, xp, pp) = (self.cov[(a, a)], self.cov[(a, b)], self.cov[(b, b)]);
        let avg = (xx + pp) * T::half();
        let aniso = (xx - pp) * T::half() * second;
        self.cov[(a, a)] = avg + aniso;
        self.cov[(b, b)] = avg - aniso;
        self.cov[(a, b)] = xp * second;
        self.cov[(b, a)] = xp * second;
        Ok(self)
    }

    /// Variance of `x cos θ + p sin θ` on `mode`.
    pub fn quadrature_variance(&self, mode: usize, theta: T) -> Result<T> {
        self.check_mode(mode)?;
        let (s, c) = theta.sin_cos();
        let (a, b) = (2 * mode, 2 * mode + 1);
        Ok(c * c * self.cov[(a, a)] + T::two() * s * c * self.cov[(a, b)] + s * s * self.cov[(b, b)])
    }

    /// Variance of the linear combination `Σ c_k r_k` of phase-space
    /// coordinates.
    pub fn combo_variance(&self, coefficients: &[T]) -> Result<T> {
        if coefficients.len() != self.cov.dim() {
            return Err(invalid(format!(
                "expected {} coefficients, got {}",
                self.cov.dim(),
                coefficients.len()
            )));
        }
        if coefficients.iter().all(|c| *c == T::zero()) {
            return Err(invalid("combination coefficients are all zero"));
        }
        Ok(self.cov.quadratic_form(coefficients))
    }

    /// `Var((x_i − x_j)/√2) + Var((p_i + p_j)/√2)`; below 1 certifies
    /// entanglement.
    pub fn duan_sum(&self, mode_i: usize, mode_j: usize) -> Result<T> {
        self.check_mode(mode_i)?;
        self.check_mode(mode_j)?;
        if mode_i == mode_j {
            return Err(invalid("duan_sum needs two distinct modes"));
        }
        let w = T::FRAC_1_SQRT_2();
        let mut cx = vec![T::zero(); self.cov.dim()];
        cx[2 * mode_i] = w;
        cx[2 * mode_j] = -w;
        let mut cp = vec![T::zero(); self.cov.dim()];
        cp[2 * mode_i + 1] = w;
        cp[2 * mode_j + 1] = w;
        Ok(self.combo_variance(&cx)? + self.combo_variance(&cp)?)
    }

    /// Smallest eigenvalue of `cov + (i/2)Ω`.
    pub fn uncertainty_margin(&self) -> T {
        let n = self.cov.dim();
        // Real embedding [[V, −B], [B, V]] of the Hermitian matrix V + iB.
        let mut big = Mat::zeros(2 * n);
        for i in 0..n {
            for j in 0..n {
                big[(i, j)] = self.cov[(i, j)];
                big[(i + n, j + n)] = self.cov[(i, j)];
            }
        }
        for m in 0..self.n_modes {
            let (a, b) = (2 * m, 2 * m + 1);
            // B = Ω/2 with Ω_ab = 1, Ω_ba = −1
            let h = T::half();
            big[(a + n, b)] = h;
            big[(b + n, a)] = -h;
            big[(a, b + n)] = -h;
            big[(b, a + n)] = h;
        }
        big.symmetric_eigenvalues()[0]
    }

    /// Validate symmetry and the uncertainty relation at the scalar's
    /// tolerance.
    pub fn check_physical(&self) -> Result<()> {
        if self.cov.asymmetry() > T::SYMMETRY_TOLERANCE {
            return Err(Error::Model(format!(
                "covariance is not symmetric (relative deviation {})",
                self.cov.asymmetry()
            )));
        }
        let margin = self.uncertainty_margin();
        if margin < -T::TOLERANCE {
            return Err(Error::Model(format!(
                "covariance violates the uncertainty relation (eigenvalue {margin})"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{eta_meas, linear_to_db};

    const SQ2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn vacuum_moments() {
        let v = GaussianState::<f64>::vacuum(1).unwrap();
        assert_eq!(v.mean(), &[0.0, 0.0]);
        assert_eq!(v.cov()[(0, 0)], 0.5);
        assert_eq!(v.cov()[(1, 1)], 0.5);
        assert_eq!(v.cov()[(0, 1)], 0.0);
        let v2 = GaussianState::<f64>::vacuum(2).unwrap();
        assert_eq!(v2.cov(), &Mat::scaled_identity(4, 0.5));
        assert!(GaussianState::<f64>::vacuum(0).is_err());
    }

    #[test]
    fn squeezer_scales_variances() {
        let r = 0.7;
        let s = GaussianState::vacuum(1).unwrap().apply_squeezer(0, r, 0.0).unwrap();
        assert!(close(s.quadrature_variance(0, 0.0).unwrap(), 0.5 * (-2.0 * r).exp(), 1e-14));
        assert!(close(
            s.quadrature_variance(0, std::f64::consts::FRAC_PI_2).unwrap(),
            0.5 * (2.0 * r).exp(),
            1e-14
        ));
        let unchanged = GaussianState::vacuum(1).unwrap().apply_squeezer(0, 0.0, 1.3).unwrap();
        assert_eq!(unchanged.cov(), GaussianState::vacuum(1).unwrap().cov());
        assert!(GaussianState::<f64>::vacuum(1).unwrap().apply_squeezer(0, -0.1, 0.0).is_err());
        assert!(GaussianState::<f64>::vacuum(1).unwrap().apply_squeezer(1, 0.1, 0.0).is_err());
    }

    #[test]
    fn squeezing_for_four_and_a_half_db() {
        // e^{-2r} = 0.0966 ⇒ r = 1.1686, −10.15 dB before losses
        let r = -0.5 * 0.0966_f64.ln();
        let s = GaussianState::vacuum(1).unwrap().apply_squeezer(0, r, 0.0).unwrap();
        let db = linear_to_db(s.quadrature_variance(0, 0.0).unwrap() / 0.5);
        assert!((db + 10.15).abs() < 0.005, "{db}");
    }

    #[test]
    fn rotated_quadrature_of_squeezed_vacuum() {
        let r = 0.9_f64;
        let s = GaussianState::vacuum(1).unwrap().apply_squeezer(0, r, 0.0).unwrap();
        let v = s.quadrature_variance(0, std::f64::consts::FRAC_PI_4).unwrap();
        let oracle = 0.25 * ((-2.0 * r).exp() + (2.0 * r).exp());
        assert!(close(v, oracle, 1e-14));
    }

    #[test]
    fn beamsplitter_leaves_vacua_alone() {
        for t in [0.0, 0.3, 0.5, 1.0] {
            let s = GaussianState::<f64>::vacuum(2)
                .unwrap()
                .apply_beamsplitter(0, 1, t, 0.4)
                .unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let want = if i == j { 0.5 } else { 0.0 };
                    assert!((s.cov()[(i, j)] - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn unit_transmission_is_identity() {
        let s = GaussianState::vacuum(2)
            .unwrap()
            .apply_squeezer(0, 0.4, 0.2)
            .unwrap()
            .apply_squeezer(1, 0.8, 1.0)
            .unwrap();
        let out = s.clone().apply_beamsplitter(0, 1, 1.0, 0.0).unwrap();
        assert_eq!(out.cov(), s.cov());
        assert!(s.clone().apply_beamsplitter(0, 0, 0.5, 0.0).is_err());
        assert!(s.apply_beamsplitter(0, 1, 1.5, 0.0).is_err());
    }

    #[test]
    fn epr_combinations() {
        let r = 0.8_f64;
        let s = GaussianState::epr(r).unwrap();
        let xm = s.combo_variance(&[SQ2, 0.0, -SQ2, 0.0]).unwrap();
        let pp = s.combo_variance(&[0.0, SQ2, 0.0, SQ2]).unwrap();
        let xp = s.combo_variance(&[SQ2, 0.0, SQ2, 0.0]).unwrap();
        assert!(close(xm, 0.5 * (-2.0 * r).exp(), 1e-14));
        assert!(close(pp, 0.5 * (-2.0 * r).exp(), 1e-14));
        assert!(close(xp, 0.5 * (2.0 * r).exp(), 1e-14));
        let vac = GaussianState::<f64>::vacuum(2).unwrap();
        assert!(close(vac.combo_variance(&[SQ2, 0.0, -SQ2, 0.0]).unwrap(), 0.5, 1e-15));
        assert!(vac.combo_variance(&[0.0; 4]).is_err());
    }

    #[test]
    fn loss_limits_and_squeezed_oracle() {
        let r = 1.1_f64;
        let sq = GaussianState::vacuum(1).unwrap().apply_squeezer(0, r, 0.0).unwrap();
        assert_eq!(sq.clone().apply_loss(0, 1.0).unwrap().cov(), sq.cov());
        let gone = sq.clone().apply_loss(0, 0.0).unwrap();
        assert_eq!(gone.cov(), GaussianState::vacuum(1).unwrap().cov());
        let eta = 0.714;
        let v = sq.apply_loss(0, eta).unwrap().quadrature_variance(0, 0.0).unwrap() / 0.5;
        assert!(close(v, eta * (-2.0 * r).exp() + (1.0 - eta), 1e-14));
    }

    #[test]
    fn psa_vacuum_gain() {
        let p = PsaParams::new(100.0, 0.0, 1.0).unwrap();
        let s = GaussianState::vacuum(1).unwrap().apply_psa(0, &p).unwrap();
        assert!(close(s.quadrature_variance(0, 0.0).unwrap(), 50.0, 1e-14));
        assert!(close(s.quadrature_variance(0, std::f64::consts::FRAC_PI_2).unwrap(), 0.005, 1e-14));
        let id = PsaParams::new(1.0, 0.3, 1.0).unwrap();
        let sq = GaussianState::<f64>::vacuum(1).unwrap().apply_squeezer(0, 0.5, 0.1).unwrap();
        let out = sq.clone().apply_psa(0, &id).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((out.cov()[(i, j)] - sq.cov()[(i, j)]).abs() < 1e-15);
            }
        }
        assert!(PsaParams::new(0.5, 0.0, 1.0).is_err());
        assert!(PsaParams::new(2.0, 0.0, 1.1).is_err());
    }

    #[test]
    fn psa_chain_reproduces_measurement_efficiency() {
        // Oracle: expand var(r) = η_h·G·(η_o·e/2 + (1−η_o)/2) + (1−η_h)/2 by hand.
        for &(r, g, eo, eh) in &[(0.3, 1.0, 0.9, 0.5), (1.2, 316.2, 0.8, 0.24), (0.7, 17.0, 0.5, 0.9)] {
            let e = (-2.0_f64 * r).exp();
            let expanded = (eh * g * (eo * e + 1.0 - eo) + 1.0 - eh) / (eh * g + 1.0 - eh);
            let chain = |r: f64| {
                GaussianState::vacuum(1)
                    .unwrap()
                    .apply_squeezer(0, r, 0.0)
                    .unwrap()
                    .apply_psa(0, &PsaParams::new(g, 0.0, eo).unwrap())
                    .unwrap()
                    .apply_loss(0, eh)
                    .unwrap()
                    .quadrature_variance(0, 0.0)
                    .unwrap()
            };
            let normalized = chain(r) / chain(0.0);
            let closed = 1.0 - eta_meas(g, eo, eh).unwrap() * (1.0 - e);
            assert!(close(normalized, expanded, 1e-13));
            assert!(close(normalized, closed, 1e-12));
        }
    }

    #[test]
    fn duan_values() {
        let vac = GaussianState::<f64>::vacuum(2).unwrap();
        assert!(close(vac.duan_sum(0, 1).unwrap(), 1.0, 1e-15));
        let r = 0.6;
        assert!(close(GaussianState::epr(r).unwrap().duan_sum(0, 1).unwrap(), (-2.0 * r).exp(), 1e-13));
        assert!(vac.duan_sum(1, 1).is_err());
        // both combos at −4.0 dB
        let lvl = 10f64.powf(-0.4);
        assert!((2.0 * 0.5 * lvl - 0.398).abs() < 1e-3);
    }

    #[test]
    fn phase_noise_matches_gaussian_average() {
        let r = 1.0_f64;
        let sigma = 0.2;
        let sq = GaussianState::vacuum(1).unwrap().apply_squeezer(0, r, 0.0).unwrap();
        let avg = sq.clone().apply_phase_noise(0, sigma).unwrap();
        // Oracle: Gauss–Hermite-free brute-force quadrature over the angle.
        let n = 20_000;
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for k in 0..=n {
            let phi = -8.0 * sigma + 16.0 * sigma * k as f64 / n as f64;
            let w = (-0.5 * (phi / sigma).powi(2)).exp();
            let v = sq.clone().apply_rotation(0, phi).unwrap().quadrature_variance(0, 0.0).unwrap();
            acc += w * v;
            wsum += w;
        }
        assert!(close(avg.quadrature_variance(0, 0.0).unwrap(), acc / wsum, 1e-9));
    }

    #[test]
    fn uncertainty_check() {
        let s = GaussianState::<f64>::epr(1.5).unwrap();
        assert!(s.check_physical().is_ok());
        let bad = GaussianState::from_moments(vec![0.0; 2], Mat::scaled_identity(2, 0.1));
        assert!(bad.is_err());
        let asym = Mat::from_rows(&[&[1.0, 0.2], &[0.0, 1.0]]);
        assert!(GaussianState::from_moments(vec![0.0; 2], asym).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let s = GaussianState::<f32>::epr(0.5).unwrap();
        let d = s.duan_sum(0, 1).unwrap();
        assert!((d - (-1.0_f32).exp()).abs() < 1e-5);
        assert!(s.check_physical().is_ok());
    }
}
