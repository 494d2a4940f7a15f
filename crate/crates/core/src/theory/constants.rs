use serde::{Deserialize, Serialize};

use crate::activation::ActivationSpec;

/// Smoothness and curvature constants for a width-m student on data with
/// ‖x‖₂ ≤ c_x, |y| ≤ c_y and ℓ(W₀; z) ≤ c_0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub rho: f64,
    pub b_tilde: f64,
    pub b_prime: f64,
    pub c_x: f64,
    pub c_y: f64,
    pub c_0: f64,
    pub m: usize,
    pub d: usize,
    pub activation: ActivationSpec,
}

/// ρ = c_x²(B'² + B''B_φ + B''c_y/√m).
pub fn rho(act: &ActivationSpec, c_x: f64, c_y: f64, m: usize) -> f64 {
    c_x * c_x
        * (act.b_phi1 * act.b_phi1 + act.b_phi2 * act.b_phi + act.b_phi2 * c_y / (m as f64).sqrt())
}

/// lim_{m→∞} ρ.
pub fn rho_limit(act: &ActivationSpec, c_x: f64) -> f64 {
    c_x * c_x * (act.b_phi1 * act.b_phi1 + act.b_phi2 * act.b_phi)
}

/// b̃ = c_x²B''(B'c_x + c_0).
pub fn b_tilde(act: &ActivationSpec, c_x: f64, c_0: f64) -> f64 {
    c_x * c_x * act.b_phi2 * (act.b_phi1 * c_x + c_0)
}

/// b′ = c_x²B''(c_xB' + √(2c_0)).
pub fn b_prime(act: &ActivationSpec, c_x: f64, c_0: f64) -> f64 {
    c_x * c_x * act.b_phi2 * (c_x * act.b_phi1 + (2.0 * c_0).sqrt())
}

pub fn constants(
    act: &ActivationSpec,
    c_x: f64,
    c_y: f64,
    c_0: f64,
    m: usize,
    d: usize,
) -> TheoryConstants {
    TheoryConstants {
        rho: rho(act, c_x, c_y, m),
        b_tilde: b_tilde(act, c_x, c_0),
        b_prime: b_prime(act, c_x, c_0),
        c_x,
        c_y,
        c_0,
        m,
        d,
        activation: *act,
    }
}

impl TheoryConstants {
    pub fn sqrt_m(&self) -> f64 {
        (self.m as f64).sqrt()
    }

    /// c_x²B''/√m, the prefactor of every curvature correction.
    pub fn curvature_scale(&self) -> f64 {
        self.c_x * self.c_x * self.activation.b_phi2 / self.sqrt_m()
    }

    /// Same constants at another width (only ρ depends on m).
    pub fn with_width(&self, m: usize) -> Self {
        TheoryConstants {
            rho: rho(&self.activation, self.c_x, self.c_y, m),
            m,
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{certify_bounds, ActivationKind};

    #[test]
    fn tanh_values() {
        let act = certify_bounds(ActivationKind::Tanh).unwrap();
        let k = constants(&act, 1.0, 1.0, 0.5, 100, 5);
        assert!((k.rho - 1.846_780_394_811_451).abs() < 1e-14);
        assert!((k.b_prime - 1.539_600_717_839_002).abs() < 1e-14);
        assert!(rho(&act, 1.0, 1.0, 1 << 40) - rho_limit(&act, 1.0) < 1e-6);
        assert!(rho(&act, 1.0, 1.0, 400) < k.rho);
    }
}
