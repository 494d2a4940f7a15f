//! Inequality checkers. Each returns a margin (left side minus right side
//! of the "≥" form) so that a negative margin beyond the slack is a
//! violation.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Example, Network};
use crate::weights::Weights;

use super::bounds::epsilon_t_prime;
use super::constants::TheoryConstants;
use super::spectrum::{hessian_extremes, EigenMethod};

/// Absolute slack allowed in every inequality check.
pub const CHECK_SLACK: f64 = 1e-8;

/// Running count of checks, violations and the worst margin seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub name: String,
    pub checks: usize,
    pub violations: usize,
    pub worst_margin: f64,
}

impl ViolationReport {
    pub fn new(name: &str) -> Self {
        ViolationReport {
            name: name.to_string(),
            checks: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        }
    }

    pub fn record(&mut self, margin: f64) {
        self.checks += 1;
        if !(margin >= -CHECK_SLACK) {
            self.violations += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
    }

    pub fn merge(&mut self, other: &ViolationReport) {
        self.checks += other.checks;
        self.violations += other.violations;
        if other.worst_margin < self.worst_margin || other.worst_margin.is_nan() {
            self.worst_margin = other.worst_margin;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureCheck {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// −(c_x²B''/√m)|f_W(x) − y|
    pub bound_residual: f64,
    /// −(c_x²B''/√m)(c_xB'‖W − W₀‖ + √(2ℓ(W₀; z)))
    pub bound_min_eig: f64,
    /// −(b′/√m)(‖W − W₀‖ ∨ 1)
    pub bound_radius: f64,
    pub method: EigenMethod,
}

impl CurvatureCheck {
    /// Smallest margin among λ_min against the three lower bounds and ρ
    /// against λ_max.
    pub fn margin(&self, rho: f64) -> f64 {
        let lower = self.bound_residual.max(self.bound_min_eig).max(self.bound_radius);
        (self.lambda_min - lower).min(rho - self.lambda_max)
    }
}

pub fn check_curvature(
    net: &Network,
    k: &TheoryConstants,
    w: &Weights,
    w0: &Weights,
    z: &Example,
) -> Result<CurvatureCheck> {
    let ext = hessian_extremes(net, w, z)?;
    let scale = k.curvature_scale();
    let dist = w.distance(w0);
    let residual = net.residual(w, z).abs();
    let loss0 = net.loss(w0, z);
    Ok(CurvatureCheck {
        lambda_min: ext.lambda_min,
        lambda_max: ext.lambda_max,
        bound_residual: -scale * residual,
        bound_min_eig: -scale * (k.c_x * k.activation.b_phi1 * dist + (2.0 * loss0).sqrt()),
        bound_radius: -k.b_prime / k.sqrt_m() * dist.max(1.0),
        method: ext.method,
    })
}

/// ρ‖W − W′‖ − ‖∇ℓ(W) − ∇ℓ(W′)‖.
pub fn smoothness_margin(net: &Network, rho: f64, w: &Weights, w2: &Weights, z: &Example) -> f64 {
    let g = net.grad(w, z);
    let g2 = net.grad(w2, z);
    rho * w.distance(w2) - g.distance(&g2)
}

/// 2ρℓ(W) − ‖∇ℓ(W)‖².
pub fn self_bounding_margin(net: &Network, rho: f64, w: &Weights, z: &Example) -> f64 {
    let g = net.grad(w, z);
    2.0 * rho * net.loss(w, z) - g.norm_sq()
}

/// Smoothness and self-bounding reports over `pairs` × `examples`.
pub fn check_smoothness_selfbounding(
    net: &Network,
    rho: f64,
    pairs: &[(Weights, Weights)],
    examples: &[Example],
) -> (ViolationReport, ViolationReport) {
    let mut smooth = ViolationReport::new("smoothness");
    let mut selfb = ViolationReport::new("self_bounding");
    for (w, w2) in pairs {
        for z in examples {
            smooth.record(smoothness_margin(net, rho, w, w2, z));
            selfb.record(self_bounding_margin(net, rho, w, z));
            selfb.record(self_bounding_margin(net, rho, w2, z));
        }
    }
    (smooth, selfb)
}

/// ℓ(W) − ℓ(W′) − ⟨W − W′, ∇ℓ(W′)⟩ + (b′R/√m)‖W − W′‖² with
/// R = max{1, ‖W − W₀‖, ‖W′ − W₀‖}.
pub fn weak_convexity_margin(
    net: &Network,
    k: &TheoryConstants,
    w: &Weights,
    w2: &Weights,
    w0: &Weights,
    z: &Example,
) -> f64 {
    let diff = w.sub(w2);
    let g2 = net.grad(w2, z);
    let r = 1f64.max(w.distance(w0)).max(w2.distance(w0));
    net.loss(w, z) - net.loss(w2, z) - diff.dot(&g2)
        + k.b_prime * r / k.sqrt_m() * diff.norm_sq()
}

/// ⟨ΔW, Δg⟩ − [2η(1 − ηρ/2)‖Δg‖² − ε′‖ΔW − ηΔg‖²] with both gradients
/// taken at the same example and ε′ from the larger distance to W₀.
pub fn cocoercivity_margin(
    net: &Network,
    k: &TheoryConstants,
    eta: f64,
    w: &Weights,
    w2: &Weights,
    w0: &Weights,
    z: &Example,
) -> f64 {
    let dw = w.sub(w2);
    let dg = net.grad(w, z).sub(&net.grad(w2, z));
    let radius = w.distance(w0).max(w2.distance(w0));
    let eps = epsilon_t_prime(k, eta, radius);
    let mut shifted = dw.clone();
    shifted.axpy(-eta, &dg);
    dw.dot(&dg) - (2.0 * eta * (1.0 - eta * k.rho / 2.0) * dg.norm_sq() - eps * shifted.norm_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{certify_bounds, ActivationKind};
    use crate::model::{make_signs, SignPattern};
    use crate::theory::constants::constants;

    fn setup() -> (Network, TheoryConstants) {
        let act = certify_bounds(ActivationKind::Tanh).unwrap();
        let net = Network::new(3, make_signs(4, SignPattern::Alternating), act).unwrap();
        let k = constants(&act, 1.0, 1.0, 0.5, 4, 3);
        (net, k)
    }

    #[test]
    fn identical_points_give_zero_margins() {
        let (net, k) = setup();
        let w = Weights::from_row_major(3, 4, &[0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8, -0.9, 1.0, 0.2, 0.1])
            .unwrap();
        let z = Example::new(vec![0.6, 0.0, -0.8], 0.3);
        assert_eq!(weak_convexity_margin(&net, &k, &w, &w, &Weights::zeros(3, 4), &z), 0.0);
        assert_eq!(smoothness_margin(&net, k.rho, &w, &w, &z), 0.0);
    }

    #[test]
    fn report_counts() {
        let mut r = ViolationReport::new("x");
        r.record(0.5);
        r.record(-1e-9);
        r.record(-1e-3);
        assert_eq!((r.checks, r.violations), (3, 1));
        assert_eq!(r.worst_margin, -1e-3);
    }
}
