//! Two-parameter efficiency fit of squeezing measured against PSA gain.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::linear_to_db;

const MAX_ITERATIONS: usize = 500;
const RELATIVE_TOLERANCE: f64 = 1e-10;
const R0_MAX: f64 = 5.0;
const GRID: usize = 11;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservedQuadrature {
    #[default]
    Squeezed,
    AntiSqueezed,
}

/// One measured noise level at a linear PSA gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub gain: f64,
    pub db: f64,
    #[serde(default)]
    pub quadrature: ObservedQuadrature,
}

impl Observation {
    pub fn squeezed(gain: f64, db: f64) -> Self {
        Self {
            gain,
            db,
            quadrature: ObservedQuadrature::Squeezed,
        }
    }

    pub fn anti_squeezed(gain: f64, db: f64) -> Self {
        Self {
            gain,
            db,
            quadrature: ObservedQuadrature::AntiSqueezed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum R0Mode {
    Fixed(f64),
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub eta_pre: f64,
    pub eta_post: f64,
    pub r0: f64,
    /// Root-mean-square dB residual.
    pub residual: f64,
    pub iterations: usize,
    pub starts: usize,
}

fn efficiency(eta_pre: f64, eta_post: f64, gain: f64) -> (f64, f64, f64) {
    let d = eta_post * gain + 1.0 - eta_post;
    let eta = eta_pre * eta_post * gain / d;
    (eta, eta_post * gain / d, eta_pre * gain / (d * d))
}

/// Predicted noise level in dB for the given efficiencies.
pub fn model_db(eta_pre: f64, eta_post: f64, r0: f64, gain: f64, quadrature: ObservedQuadrature) -> f64 {
    let (eta, _, _) = efficiency(eta_pre, eta_post, gain);
    linear_to_db(level(eta, r0, quadrature))
}

fn level(eta: f64, r0: f64, quadrature: ObservedQuadrature) -> f64 {
    match quadrature {
        ObservedQuadrature::Squeezed => 1.0 - eta * (1.0 - (-2.0 * r0).exp()),
        ObservedQuadrature::AntiSqueezed => 1.0 + eta * ((2.0 * r0).exp() - 1.0),
    }
}

struct Problem<'a> {
    obs: &'a [Observation],
    r0: R0Mode,
}

impl Problem<'_> {
    fn n_params(&self) -> usize {
        match self.r0 {
            R0Mode::Fixed(_) => 2,
            R0Mode::Free => 3,
        }
    }

    fn r0(&self, p: &[f64]) -> f64 {
        match self.r0 {
            R0Mode::Fixed(r) => r,
            R0Mode::Free => p[2],
        }
    }

    fn project(&self, p: &mut [f64]) {
        p[0] = p[0].clamp(0.0, 1.0);
        p[1] = p[1].clamp(0.0, 1.0);
        if p.len() == 3 {
            p[2] = p[2].clamp(0.0, R0_MAX);
        }
    }

    fn cost(&self, p: &[f64]) -> f64 {
        let r0 = self.r0(p);
        self.obs
            .iter()
            .map(|o| (model_db(p[0], p[1], r0, o.gain, o.quadrature) - o.db).powi(2))
            .sum::<f64>()
            / 2.0
    }

    /// Residuals and Jacobian rows.
    fn linearize(&self, p: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let r0 = self.r0(p);
        let k = 10.0 / std::f64::consts::LN_10;
        let mut res = Vec::with_capacity(self.obs.len());
        let mut jac = Vec::with_capacity(self.obs.len());
        for o in self.obs {
            let (eta, d_a, d_b) = efficiency(p[0], p[1], o.gain);
            let l = level(eta, r0, o.quadrature);
            let (dl_deta, dl_dr) = match o.quadrature {
                ObservedQuadrature::Squeezed => (-(1.0 - (-2.0 * r0).exp()), -2.0 * eta * (-2.0 * r0).exp()),
                ObservedQuadrature::AntiSqueezed => ((2.0 * r0).exp() - 1.0, 2.0 * eta * (2.0 * r0).exp()),
            };
            res.push(linear_to_db(l) - o.db);
            jac.push([k * dl_deta * d_a / l, k * dl_deta * d_b / l, k * dl_dr / l]);
        }
        (res, jac)
    }
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: [[f64; 3]; 3], mut b: [f64; 3], n: usize) -> Option<[f64; 3]> {
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if !(a[piv][c].abs() > 0.0) {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

struct Outcome {
    p: Vec<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

/// Levenberg–Marquardt damped Gauss–Newton with projection onto the box.
fn descend(problem: &Problem, start: Vec<f64>) -> Outcome {
    let n = problem.n_params();
    let mut p = start;
    problem.project(&mut p);
    let mut cost = problem.cost(&p);
    let mut lambda = 1e-3;
    for it in 0..MAX_ITERATIONS {
        if cost < 1e-30 {
            return Outcome { p, cost, iterations: it, converged: true };
        }
        let (res, jac) = problem.linearize(&p);
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (r, row) in res.iter().zip(&jac) {
            for i in 0..n {
                jtr[i] += row[i] * r;
                for j in 0..n {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let mut accepted = None;
        while lambda < 1e16 {
            let mut a = jtj;
            for i in 0..n {
                a[i][i] += lambda * (jtj[i][i] + 1e-12);
            }
            let step = solve(a, [-jtr[0], -jtr[1], -jtr[2]], n);
            if let Some(step) = step {
                let mut trial: Vec<f64> = (0..n).map(|i| p[i] + step[i]).collect();
                problem.project(&mut trial);
                let c = problem.cost(&trial);
                if c < cost {
                    accepted = Some((trial, c));
                    lambda = (lambda / 3.0).max(1e-12);
                    break;
                }
            }
            lambda *= 4.0;
        }
        match accepted {
            Some((trial, c)) => {
                let change = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = c;
                if change < RELATIVE_TOLERANCE {
                    return Outcome { p, cost, iterations: it + 1, converged: true };
                }
            }
            // No descent direction left inside the box.
            None => return Outcome { p, cost, iterations: it + 1, converged: true },
        }
    }
    Outcome {
        p,
        cost,
        iterations: MAX_ITERATIONS,
        converged: false,
    }
}

/// Least-squares fit of `(eta_pre, eta_post)` and optionally `r0` to noise
/// levels measured at several PSA gains.
///
/// With `r0` free only the product of the pre-PSA efficiency and the
/// squeezing depth is visible in squeezed data, so at least one
/// anti-squeezed observation is required alongside a squeezed one.
pub fn fit_efficiencies(observations: &[Observation], r0: R0Mode) -> Result<FitResult> {
    for o in observations {
        if !(o.gain >= 1.0) || !o.gain.is_finite() {
            return Err(invalid(format!("gain must be finite and at least 1, got {}", o.gain)));
        }
        if !o.db.is_finite() {
            return Err(invalid("observed level must be finite"));
        }
    }
    let mut gains: Vec<f64> = observations.iter().map(|o| o.gain).collect();
    gains.sort_by(f64::total_cmp);
    gains.dedup();
    if gains.len() < 2 {
        return Err(Error::Fit("rank deficient: need observations at two or more distinct gains".into()));
    }
    let r0_starts: Vec<f64> = match r0 {
        R0Mode::Fixed(r) => {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(invalid("r0 must be finite and non-negative"));
            }
            vec![r]
        }
        R0Mode::Free => {
            if observations.len() < 3 {
                return Err(Error::Fit("need at least 3 observations with r0 free".into()));
            }
            let has = |q| observations.iter().any(|o| o.quadrature == q);
            if !has(ObservedQuadrature::Squeezed) || !has(ObservedQuadrature::AntiSqueezed) {
                return Err(Error::Fit(
                    "r0 free needs both squeezed and anti-squeezed observations".into(),
                ));
            }
            vec![0.3, 1.0, 2.0]
        }
    };
    let problem = Problem { obs: observations, r0 };
    let mut best: Option<Outcome> = None;
    let mut starts = 0;
    let mut total_iterations = 0;
    for i in 0..GRID {
        for j in 0..GRID {
            for &r in &r0_starts {
                let a = 0.05 + 0.09 * i as f64;
                let b = 0.05 + 0.09 * j as f64;
                let start = match r0 {
                    R0Mode::Fixed(_) => vec![a, b],
                    R0Mode::Free => vec![a, b, r],
                };
                let out = descend(&problem, start);
                starts += 1;
                total_iterations += out.iterations;
                let better = match &best {
                    None => true,
                    Some(b) => (out.converged && !b.converged) || (out.converged == b.converged && out.cost < b.cost),
                };
                if better {
                    best = Some(out);
                }
            }
        }
    }
    let best = best.expect("grid is non-empty");
    let r0_value = problem.r0(&best.p);
    let residual = (2.0 * best.cost / observations.len() as f64).sqrt();
    if !best.converged {
        return Err(Error::Fit(format!(
            "no start converged within {MAX_ITERATIONS} iterations; best eta_pre={:.6}, eta_post={:.6}, r0={:.6}, rms residual {:.3e} dB",
            best.p[0], best.p[1], r0_value, residual
        )));
    }
    Ok(FitResult {
        eta_pre: best.p[0],
        eta_post: best.p[1],
        r0: r0_value,
        residual,
        iterations: total_iterations,
        starts,
    })
}
