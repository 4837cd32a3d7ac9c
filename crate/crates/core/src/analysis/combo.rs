use serde::{Deserialize, Serialize};

use crate::spectral::Quadrature;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComboLabel {
    XPlus,
    XMinus,
    PPlus,
    PMinus,
}

impl ComboLabel {
    pub const ALL: [ComboLabel; 4] = [
        ComboLabel::XPlus,
        ComboLabel::XMinus,
        ComboLabel::PPlus,
        ComboLabel::PMinus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComboLabel::XPlus => "x_plus",
            ComboLabel::XMinus => "x_minus",
            ComboLabel::PPlus => "p_plus",
            ComboLabel::PMinus => "p_minus",
        }
    }
}

/// `(q1 ± q2)/√2` for one quadrature configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComboSpec {
    pub label: ComboLabel,
    pub coefficients: [f64; 2],
}

impl ComboSpec {
    pub fn new(label: ComboLabel) -> Self {
        let w = std::f64::consts::FRAC_1_SQRT_2;
        let sign = match label {
            ComboLabel::XPlus | ComboLabel::PPlus => 1.0,
            ComboLabel::XMinus | ComboLabel::PMinus => -1.0,
        };
        Self {
            label,
            coefficients: [w, sign * w],
        }
    }

    pub fn quadrature(&self) -> Quadrature {
        match self.label {
            ComboLabel::XPlus | ComboLabel::XMinus => Quadrature::X,
            ComboLabel::PPlus | ComboLabel::PMinus => Quadrature::P,
        }
    }

    pub fn sign(&self) -> f64 {
        self.coefficients[1].signum()
    }

    /// Sum or difference combination irrespective of quadrature; used on
    /// shot-noise traces.
    pub fn same_sign_for(&self, quadrature: Quadrature) -> ComboSpec {
        let plus = self.sign() > 0.0;
        ComboSpec::new(match (quadrature, plus) {
            (Quadrature::X, true) => ComboLabel::XPlus,
            (Quadrature::X, false) => ComboLabel::XMinus,
            (Quadrature::P, true) => ComboLabel::PPlus,
            (Quadrature::P, false) => ComboLabel::PMinus,
        })
    }

    /// The combination the EPR state squeezes for this quadrature.
    pub fn squeezed(quadrature: Quadrature) -> ComboSpec {
        match quadrature {
            Quadrature::X => ComboSpec::new(ComboLabel::XMinus),
            Quadrature::P => ComboSpec::new(ComboLabel::PPlus),
        }
    }

    pub fn anti_squeezed(quadrature: Quadrature) -> ComboSpec {
        match quadrature {
            Quadrature::X => ComboSpec::new(ComboLabel::XPlus),
            Quadrature::P => ComboSpec::new(ComboLabel::PMinus),
        }
    }

    pub fn apply(&self, a: f64, b: f64) -> f64 {
        self.coefficients[0] * a + self.coefficients[1] * b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_norm_coefficients() {
        for l in ComboLabel::ALL {
            let c = ComboSpec::new(l).coefficients;
            assert!((c[0] * c[0] + c[1] * c[1] - 1.0).abs() < 1e-15);
        }
        assert_eq!(ComboSpec::squeezed(Quadrature::X).label, ComboLabel::XMinus);
        assert_eq!(ComboSpec::squeezed(Quadrature::P).label, ComboLabel::PPlus);
    }
}
