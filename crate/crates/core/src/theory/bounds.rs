//! Closed-form stability, generalization and optimization bounds. Risk sums
//! are passed as per-step sequences (index j holds E[L_S(W_j)] or its
//! across-seed estimate).

use std::f64::consts::E;

use crate::error::{LabError, Result};

use super::constants::TheoryConstants;

fn prefix_sum(risks: &[f64], len: usize) -> Result<f64> {
    if risks.len() < len {
        return Err(LabError::domain(format!(
            "risk sequence has {} entries, {len} needed",
            risks.len()
        )));
    }
    Ok(risks[..len].iter().fold(0.0, |a, b| a + b))
}

/// Coefficient (4e²η²ρ²t/n² + 4eηρ/n) multiplying Σ_{j<t} L_S(W_j).
pub fn gd_generalization_coefficient(rho: f64, n: usize, eta: f64, t: usize) -> f64 {
    let n = n as f64;
    4.0 * E * E * eta * eta * rho * rho * t as f64 / (n * n) + 4.0 * E * eta * rho / n
}

/// GD generalization gap bound at step t, using Σ_{j<t} risks.
pub fn gd_generalization_bound(
    k: &TheoryConstants,
    n: usize,
    eta: f64,
    t: usize,
    risks: &[f64],
) -> Result<f64> {
    Ok(gd_generalization_coefficient(k.rho, n, eta, t) * prefix_sum(risks, t)?)
}

/// Smallest margin of E[L(W_s)] ≥ L(W*_λ) over the measured steps s < T,
/// crediting each Monte-Carlo estimate two standard errors. `population`
/// holds (s, L(W_s), se) rows. None when no row has s < T.
pub fn ws_lower_margin(population: &[(usize, f64, f64)], horizon: usize, reference_risk: f64) -> Option<f64> {
    population
        .iter()
        .filter(|(s, _, _)| *s < horizon)
        .map(|(_, risk, se)| risk + 2.0 * se - reference_risk)
        .reduce(f64::min)
}

/// Per-realization GD bound on max_{t≤T} ‖W_t − W_t^(i)‖₂:
/// 2ηeT√(2c_0ρ(ρηT + 2))/n.
pub fn gd_stability_bound_uniform(k: &TheoryConstants, n: usize, eta: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    2.0 * eta * E * t * (2.0 * k.c_0 * k.rho * (k.rho * eta * t + 2.0)).sqrt() / n as f64
}

/// GD on-average squared stability at step t:
/// 8e²η²ρ(1+t)/n² · Σ_{j≤t} L_S(W_j).
pub fn gd_on_average_sq_bound(
    k: &TheoryConstants,
    n: usize,
    eta: f64,
    t: usize,
    risks: &[f64],
) -> Result<f64> {
    let n = n as f64;
    let coef = 8.0 * E * E * eta * eta * k.rho * (1.0 + t as f64) / (n * n);
    Ok(coef * prefix_sum(risks, t + 1)?)
}

/// SGD on-average squared stability of W_{t+1}:
/// 8e²ρ(1+t/n)η²/n · Σ_{j≤t} L_S(W_j).
pub fn sgd_stability_bound(
    k: &TheoryConstants,
    n: usize,
    eta: f64,
    t: usize,
    risks: &[f64],
) -> Result<f64> {
    let nf = n as f64;
    let coef = 8.0 * E * E * k.rho * (1.0 + t as f64 / nf) * eta * eta / nf;
    Ok(coef * prefix_sum(risks, t + 1)?)
}

/// SGD generalization gap bound at W_t; `risk_at_t` is E[L_S(W_t)].
pub fn sgd_generalization_bound(
    k: &TheoryConstants,
    n: usize,
    eta: f64,
    t: usize,
    risks: &[f64],
    risk_at_t: f64,
) -> Result<f64> {
    let nf = n as f64;
    let sum = prefix_sum(risks, t + 1)?;
    let growth = 1.0 + t as f64 / nf;
    let first = 4.0 * E * E * k.rho * k.rho * growth * eta * eta / nf * sum;
    let second = 4.0 * E * k.rho * eta * (growth * risk_at_t.max(0.0) / nf * sum).sqrt();
    Ok(first + second)
}

/// R_T = (8e²ρ²η³T²/n² + 8eη²Tρ/n) Σ_{j<T} L_S(W_j) + 2 dist², where
/// dist = ‖W*_λ − W₀‖₂.
pub fn gd_iterate_bound_rt(
    k: &TheoryConstants,
    n: usize,
    eta: f64,
    horizon: usize,
    risks: &[f64],
    dist: f64,
) -> Result<f64> {
    Ok(rt_coefficient(k.rho, n, eta, horizon) * prefix_sum(risks, horizon)? + 2.0 * dist * dist)
}

pub(crate) fn rt_coefficient(rho: f64, n: usize, eta: f64, horizon: usize) -> f64 {
    let n = n as f64;
    let t = horizon as f64;
    8.0 * E * E * rho * rho * eta.powi(3) * t * t / (n * n) + 8.0 * E * eta * eta * t * rho / n
}

/// GD optimization bound L(W*_λ) + λ dist² + b̃R_T(dist + √(2ηTc_0))/√m
/// with λ = 1/(ηT).
pub fn gd_optimization_bound(
    k: &TheoryConstants,
    n: usize,
    eta: f64,
    horizon: usize,
    risks: &[f64],
    reference_risk: f64,
    dist: f64,
) -> Result<f64> {
    let r_t = gd_iterate_bound_rt(k, n, eta, horizon, risks, dist)?;
    let lambda = 1.0 / (eta * horizon as f64);
    let radius = dist + (2.0 * eta * horizon as f64 * k.c_0).sqrt();
    Ok(reference_risk + lambda * dist * dist + k.b_tilde * r_t * radius / k.sqrt_m())
}

/// Σ_{s<T} L_S(W_s) ≤ 2TL(W*_λ) + 2dist²/η + 4b̃T(dist + √(2ηTc_0))dist²/√m.
pub fn gd_risk_sum_bound(
    k: &TheoryConstants,
    eta: f64,
    horizon: usize,
    reference_risk: f64,
    dist: f64,
) -> f64 {
    let t = horizon as f64;
    let radius = dist + (2.0 * eta * t * k.c_0).sqrt();
    2.0 * t * reference_risk
        + 2.0 * dist * dist / eta
        + 4.0 * k.b_tilde * t * radius * dist * dist / k.sqrt_m()
}

/// R′_T = max{2√(Tηc_0), dist}.
pub fn r_t_prime(k: &TheoryConstants, eta: f64, horizon: usize, dist: f64) -> f64 {
    (2.0 * (horizon as f64 * eta * k.c_0).sqrt()).max(dist)
}

/// Right-hand side of the SGD optimization inequality:
/// E‖W₀ − W*_λ‖² + 2ρη² Σ_{t<T} L_S(W_t) + 2Tηb′R′_TΔ_T/√m.
/// The left-hand side is 2η Σ_{t<T} E[L_S(W_t) − L_S(W*_λ)].
pub fn sgd_optimization_bound(
    k: &TheoryConstants,
    eta: f64,
    horizon: usize,
    risks: &[f64],
    dist: f64,
    r_prime: f64,
    delta_t: f64,
) -> Result<f64> {
    let t = horizon as f64;
    Ok(dist * dist
        + 2.0 * k.rho * eta * eta * prefix_sum(risks, horizon)?
        + 2.0 * t * eta * k.b_prime * r_prime * delta_t / k.sqrt_m())
}

/// Σ_{t<T} L_S(W_t) ≤ 4TL(W*_λ) + 2(1/η + 4b′TR′_T/√m)dist².
pub fn sgd_risk_sum_bound(
    k: &TheoryConstants,
    eta: f64,
    horizon: usize,
    reference_risk: f64,
    dist: f64,
    r_prime: f64,
) -> f64 {
    let t = horizon as f64;
    4.0 * t * reference_risk
        + 2.0 * (1.0 / eta + 4.0 * k.b_prime * t * r_prime / k.sqrt_m()) * dist * dist
}

/// Bound on Δ_{t+1} = max_{j≤t+1} E‖W_j − W*_λ‖².
pub fn sgd_delta_bound(
    k: &TheoryConstants,
    n: usize,
    eta: f64,
    t: usize,
    risks: &[f64],
    dist: f64,
) -> Result<f64> {
    let nf = n as f64;
    let tf = t as f64;
    let growth_sum: f64 = (0..=t).map(|j| 1.0 + j as f64 / nf).sum();
    let factor = 1.0
        + 4.0 * E * E * eta * k.rho * growth_sum / nf
        + 4.0 * E * (tf + 1.0).sqrt() * (1.0 + tf / nf).sqrt() / nf.sqrt();
    Ok(2.0 * dist * dist + 4.0 * k.rho * eta * eta * factor * prefix_sum(risks, t + 1)?)
}

/// 2√(Tηc_0), the SGD iterate radius under the crude width condition.
pub fn sgd_crude_radius(k: &TheoryConstants, eta: f64, horizon: usize) -> f64 {
    2.0 * (horizon as f64 * eta * k.c_0).sqrt()
}

/// √(2ηt·L_S(W₀)), the GD iterate radius.
pub fn gd_iterate_radius(eta: f64, t: usize, initial_risk: f64) -> f64 {
    (2.0 * eta * t as f64 * initial_risk).sqrt()
}

/// ε_t = (c_x²B''/√m)(B'c_x(1+ηρ)‖W_t − W_t^(i)‖ + 2√(2c_0)).
pub fn epsilon_t(k: &TheoryConstants, eta: f64, coupled_dist: f64) -> f64 {
    k.curvature_scale()
        * (k.activation.b_phi1 * k.c_x * (1.0 + eta * k.rho) * coupled_dist
            + 2.0 * (2.0 * k.c_0).sqrt())
}

/// ε′_t = (c_x²B''/√m)(B'c_x(1+2ηρ)r + √(2c_0)), r the larger distance to W₀.
pub fn epsilon_t_prime(k: &TheoryConstants, eta: f64, radius: f64) -> f64 {
    k.curvature_scale()
        * (k.activation.b_phi1 * k.c_x * (1.0 + 2.0 * eta * k.rho) * radius
            + (2.0 * k.c_0).sqrt())
}

/// Gap implied by on-average squared stability ε² for a ρ-smooth
/// nonnegative loss: ρε²/2 + √(2ρ·E[L_S]·ε²).
pub fn gap_from_stability(rho: f64, epsilon_sq: f64, mean_risk: f64) -> f64 {
    0.5 * rho * epsilon_sq + (2.0 * rho * mean_risk.max(0.0) * epsilon_sq).sqrt()
}

/// GD excess-risk rate ηT·L*/n + Λ with unit constants (trend use only).
pub fn gd_rate(eta_t: f64, n: usize, l_star: f64, regularity: f64) -> f64 {
    eta_t * l_star / n as f64 + regularity
}

/// SGD excess-risk rate Λ + η·L* with unit constants (trend use only).
pub fn sgd_rate(eta: f64, l_star: f64, regularity: f64) -> f64 {
    regularity + eta * l_star
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{certify_bounds, ActivationKind};
    use crate::theory::constants::constants;

    fn tanh_k(m: usize, c_0: f64) -> TheoryConstants {
        constants(&certify_bounds(ActivationKind::Tanh).unwrap(), 1.0, 1.0, c_0, m, 5)
    }

    #[test]
    fn zero_risks_give_zero() {
        let k = tanh_k(100, 0.5);
        let z = vec![0.0; 200];
        assert_eq!(gd_generalization_bound(&k, 64, 0.1, 50, &z).unwrap(), 0.0);
        assert_eq!(sgd_stability_bound(&k, 64, 0.1, 50, &z).unwrap(), 0.0);
        assert_eq!(sgd_generalization_bound(&k, 64, 0.1, 50, &z, 0.0).unwrap(), 0.0);
        assert_eq!(gd_iterate_bound_rt(&k, 64, 0.1, 50, &z, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn uniform_bound_limits() {
        let k = tanh_k(100, 0.5);
        assert_eq!(gd_stability_bound_uniform(&k, 1000, 0.1, 0), 0.0);
        let a = gd_stability_bound_uniform(&k, 1000, 0.1, 100);
        let b = gd_stability_bound_uniform(&k, 2000, 0.1, 100);
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_n_shrinks_gd_bound_between_two_and_four() {
        let k = tanh_k(100, 0.5);
        let r = vec![0.2; 50];
        let a = gd_generalization_bound(&k, 64, 0.1, 50, &r).unwrap();
        let b = gd_generalization_bound(&k, 128, 0.1, 50, &r).unwrap();
        assert!(a / b > 2.0 && a / b < 4.0);
    }

    #[test]
    fn short_risk_sequence_rejected() {
        let k = tanh_k(100, 0.5);
        assert!(gd_generalization_bound(&k, 64, 0.1, 50, &[0.0; 10]).is_err());
        assert!(sgd_stability_bound(&k, 64, 0.1, 10, &[0.0; 10]).is_err());
    }

    #[test]
    fn sgd_optimization_reduces_without_distances() {
        let k = tanh_k(100, 0.5);
        let r = vec![0.3; 10];
        let v = sgd_optimization_bound(&k, 0.1, 10, &r, 0.0, 1.0, 0.0).unwrap();
        assert!((v - 2.0 * k.rho * 0.01 * 3.0).abs() < 1e-14);
    }

    #[test]
    fn sgd_risk_sum_wide_limit() {
        let k = tanh_k(usize::MAX, 0.5);
        let v = sgd_risk_sum_bound(&k, 0.1, 100, 0.0, 1.0, 2.0);
        assert!((v - 20.0).abs() < 1e-6);
    }

    #[test]
    fn ws_lower_ignores_final_step_and_credits_two_se() {
        let rows = [(0, 0.3, 0.0), (10, 0.1, 0.01), (20, 0.0, 0.0)];
        let m = ws_lower_margin(&rows, 20, 0.11).unwrap();
        assert!((m - 0.01).abs() < 1e-15);
        assert_eq!(ws_lower_margin(&rows[2..], 20, 0.0), None);
    }
}
