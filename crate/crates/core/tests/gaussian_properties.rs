use eprsim::gaussian::{eta_meas, GaussianState, PsaParams};
use eprsim::{GaussianState32, GaussianState64};
use proptest::prelude::*;

fn det(m: &eprsim::linalg::Mat<f64>) -> f64 {
    // product of the eigenvalues of a symmetric matrix
    m.symmetric_eigenvalues().iter().product()
}

/// Normalized output variance of an x-squeezed vacuum through PSA and
/// detector loss, as an explicit chain of Gaussian maps.
fn chain_level(r: f64, theta: f64, gain: f64, eta_opa: f64, eta_hd: f64) -> f64 {
    let run = |r: f64| {
        GaussianState64::vacuum(1)
            .unwrap()
            .apply_squeezer(0, r, theta)
            .unwrap()
            .apply_psa(0, &PsaParams::new(gain, 0.0, eta_opa).unwrap())
            .unwrap()
            .apply_loss(0, eta_hd)
            .unwrap()
            .quadrature_variance(0, 0.0)
            .unwrap()
    };
    run(r) / run(0.0)
}

#[test]
fn closed_form_matches_chain_on_grid() {
    let gains: [f64; 5] = [1.0, 3.0, 31.6, 316.2, 1e4];
    let etas: [f64; 5] = [0.05, 0.3, 0.55, 0.8, 1.0];
    let rs: [f64; 5] = [0.1, 0.4, 0.8, 1.2, 2.0];
    let mut worst = 0.0f64;
    let mut count = 0;
    for &g in &gains {
        for &eo in &etas {
            for &eh in &etas {
                for &r in &rs {
                    let e = (-2.0 * r).exp();
                    let from_chain = (1.0 - chain_level(r, 0.0, g, eo, eh)) / (1.0 - e);
                    worst = worst.max((from_chain - eta_meas(g, eo, eh).unwrap()).abs());
                    count += 1;
                }
            }
        }
    }
    assert_eq!(count, 625);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn unit_gain_and_infinite_gain_limits() {
    for &(eo, eh) in &[(0.8f64, 0.24f64), (0.767, 0.36), (1.0, 0.5)] {
        assert!((eta_meas(1.0, eo, eh).unwrap() - eo * eh).abs() < 1e-12);
        assert!((eta_meas(f64::INFINITY, eo, eh).unwrap() - eo).abs() < 1e-12);
        assert!((eta_meas(1e15, eo, eh).unwrap() - eo).abs() < 1e-12);
    }
}

#[derive(Clone, Debug)]
enum Op {
    Squeeze(usize, f64, f64),
    Rotate(usize, f64),
    Split(f64, f64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..2usize, 0.0..0.7f64, -3.2..3.2f64).prop_map(|(m, r, t)| Op::Squeeze(m, r, t)),
        (0..2usize, -3.2..3.2f64).prop_map(|(m, a)| Op::Rotate(m, a)),
        (0.0..1.0f64, -3.2..3.2f64).prop_map(|(t, p)| Op::Split(t, p)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn gaussian_unitaries_preserve_purity(ops in prop::collection::vec(op(), 1..6)) {
        let mut s = GaussianState64::vacuum(2).unwrap();
        for o in ops {
            s = match o {
                Op::Squeeze(m, r, t) => s.apply_squeezer(m, r, t).unwrap(),
                Op::Rotate(m, a) => s.apply_rotation(m, a).unwrap(),
                Op::Split(t, p) => s.apply_beamsplitter(0, 1, t, p).unwrap(),
            };
        }
        // det V = (1/2)^{2n} for pure states; symplectic eigenvalues stay 1/2
        let d = det(s.cov());
        prop_assert!((d / 0.0625 - 1.0).abs() < 1e-8, "det {}", d);
        prop_assert!(s.uncertainty_margin().abs() < 1e-8);
        prop_assert!(s.check_physical().is_ok());
    }

    #[test]
    fn epr_duan_is_exp_minus_two_r(r in 0.0..2.0f64) {
        let d = GaussianState64::epr(r).unwrap().duan_sum(0, 1).unwrap();
        prop_assert!((d - (-2.0 * r).exp()).abs() < 1e-12);
    }

    #[test]
    fn more_loss_means_less_squeezing(r in 0.05..2.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let level = |eta: f64| {
            let s = GaussianState64::epr(r).unwrap().apply_loss(0, eta).unwrap().apply_loss(1, eta).unwrap();
            s.duan_sum(0, 1).unwrap()
        };
        prop_assert!(level(lo) >= level(hi) - 1e-12);
        prop_assert!(level(lo) <= 1.0 + 1e-12);
    }

    #[test]
    fn amplification_preserves_which_side_of_shot(
        r in 0.05..2.0f64, g_db in 0.0..40.0f64, eo in 0.01..1.0f64, eh in 0.01..1.0f64,
    ) {
        let g = 10f64.powf(g_db / 10.0);
        let half_pi = std::f64::consts::FRAC_PI_2;
        prop_assert!(chain_level(r, 0.0, g, eo, eh) < 1.0);
        prop_assert!(chain_level(r, half_pi, g, eo, eh) > 1.0);
    }

    #[test]
    fn single_precision_tracks_double(r in 0.0..1.5f64, eta in 0.1..1.0f64) {
        let d = GaussianState64::epr(r).unwrap().apply_loss(0, eta).unwrap().duan_sum(0, 1).unwrap();
        let s = GaussianState32::epr(r as f32).unwrap().apply_loss(0, eta as f32).unwrap().duan_sum(0, 1).unwrap();
        prop_assert!(((s as f64) - d).abs() < 1e-5 * d.max(1.0));
    }
}

#[test]
fn loss_after_squeezing_is_physical() {
    // one lossy arm: one symplectic eigenvalue stays at 1/2, the other grows
    let s = GaussianState::<f64>::epr(1.0).unwrap().apply_loss(0, 0.3).unwrap();
    assert!(s.uncertainty_margin().abs() < 1e-10);
    assert!(det(s.cov()) > 0.0625 * (1.0 + 1e-6));
    let both = s.apply_loss(1, 0.5).unwrap();
    assert!(both.uncertainty_margin() > 1e-3);
}
