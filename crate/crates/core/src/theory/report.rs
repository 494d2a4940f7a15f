//! Width thresholds and the aggregated bound report.

use std::f64::consts::E;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

use super::bounds::{self, rt_coefficient};
use super::constants::TheoryConstants;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub name: String,
    pub required_m: f64,
    pub configured_m: usize,
    pub satisfied: bool,
}

/// Required widths for each result, with ρ evaluated at the configured m.
/// `dist` is ‖W*_λ − W₀‖₂ for λ = 1/(ηT).
pub fn overparam_thresholds(
    k: &TheoryConstants,
    n: usize,
    eta: f64,
    horizon: usize,
    dist: f64,
) -> Vec<Threshold> {
    let t = horizon as f64;
    let nf = n as f64;
    let rho = k.rho;
    let b2 = k.activation.b_phi2;
    let b1 = k.activation.b_phi1;
    let cx = k.c_x;
    let radius = (2.0 * eta * t * k.c_0).sqrt() + dist;

    let inner = 2.0 / nf * (rho * (rho * eta * t + 2.0)).sqrt() * b1 * cx * (1.0 + eta * rho) * eta * E * t
        + 1.0;
    let gd_stability = 32.0 * k.c_0 * eta * eta * t * t * cx.powi(4) * b2 * b2 * inner * inner;

    let gd_optimization = 4.0 * k.b_tilde.powi(2) * (eta * t).powi(2) * radius * radius;

    let coef = rt_coefficient(rho, n, eta, horizon);
    let gd_risk_sum = 4.0 * coef * coef * (k.b_tilde * t * radius).powi(2);

    let r_prime = bounds::r_t_prime(k, eta, horizon, dist);
    let sgd_stability = 16.0 * eta * eta * t * t * (k.b_prime * r_prime).powi(2) * (1.0 + 2.0 * eta * rho).powi(2);

    let growth = 1.0 + t / nf;
    let factor = 1.0 + 4.0 * E * E * eta * rho * t * growth / nf + 4.0 * E * t.sqrt() * growth.sqrt() / nf.sqrt();
    let sgd_excess = sgd_stability
        .max(4.0 * (8.0 * k.b_prime * t * rho * eta * eta * r_prime).powi(2) * factor * factor);

    let sgd_crude = 64.0 * k.c_0 * k.b_prime.powi(2) * (t * eta).powi(3);

    [
        ("gd_stability", gd_stability),
        ("gd_optimization", gd_optimization),
        ("gd_risk_sum", gd_risk_sum),
        ("sgd_stability", sgd_stability),
        ("sgd_excess_risk", sgd_excess),
        ("sgd_crude_iterate", sgd_crude),
    ]
    .into_iter()
    .map(|(name, required_m)| Threshold {
        name: name.to_string(),
        required_m,
        configured_m: k.m,
        satisfied: k.m as f64 >= required_m,
    })
    .collect()
}

pub fn write_thresholds_csv<W: Write>(rows: &[Threshold], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "required_m", "configured_m", "satisfied"])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.required_m.to_string(),
            r.configured_m.to_string(),
            r.satisfied.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Inputs that feed the bound report. Absent measurements fall back to
/// a-priori values (see [`BoundReport::build`]).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportInputs {
    pub n: usize,
    pub eta: f64,
    pub horizon: usize,
    /// E[L_S(W_j)] for j = 0..=T.
    pub risks: Option<Vec<f64>>,
    /// ‖W*_λ − W₀‖₂ and L(W*_λ) of the regularized reference.
    pub reference_dist: f64,
    pub reference_risk: f64,
    pub reference_converged: bool,
    /// Measured ‖W_t − W_t^(i)‖₂, t = 0..=T (worst index).
    pub coupled_distances: Option<Vec<f64>>,
    /// Measured max{‖W_t − W₀‖, ‖W_t^(i) − W₀‖}, t = 0..=T.
    pub radii: Option<Vec<f64>>,
    /// Measured Δ_T.
    pub delta_t: Option<f64>,
    /// η exceeds 1/(2ρ) or strict mode was off.
    pub assumptions_violated: bool,
    /// (s, L(W_s), se) Monte-Carlo population risks along the run.
    pub population_risks: Option<Vec<(usize, f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub constants: TheoryConstants,
    pub n: usize,
    pub eta: f64,
    pub horizon: usize,
    pub thresholds: Vec<Threshold>,
    pub risk_source: String,
    pub risk_sum: f64,
    pub gen_bound_gd: f64,
    pub stab_bound_gd_uniform: f64,
    pub stab_bound_gd_on_average_sq: f64,
    pub stab_bound_sgd: f64,
    pub gen_bound_sgd: f64,
    pub r_t: f64,
    pub r_t_prime: f64,
    pub opt_bound_gd: f64,
    pub opt_bound_sgd: f64,
    pub risk_sum_bound_gd: f64,
    pub risk_sum_bound_sgd: f64,
    pub delta_t: f64,
    pub epsilon_t: Vec<f64>,
    pub epsilon_t_prime: Vec<f64>,
    pub surrogate_based: bool,
    pub reference_converged: bool,
    pub assumptions_violated: bool,
    /// Worst margin of the population-risk lower condition, when checked.
    pub ws_lower_margin: Option<f64>,
    /// The GD optimization bound assumes that condition; true unless it
    /// was checked and held.
    pub opt_bound_gd_conditional: bool,
}

impl BoundReport {
    /// Without measured risks every L_S(W_j) is replaced by c_0; without
    /// measured distances ε_t uses the uniform GD stability bound and ε′_t
    /// the crude iterate radius 2√(tηc_0).
    pub fn build(k: &TheoryConstants, inp: &ReportInputs) -> Result<Self> {
        let (n, eta, horizon) = (inp.n, inp.eta, inp.horizon);
        if n == 0 || !(eta > 0.0) {
            return Err(LabError::config("bound report needs n >= 1 and eta > 0"));
        }
        let (risks, risk_source) = match &inp.risks {
            Some(r) => {
                if r.len() < horizon + 1 {
                    return Err(LabError::config(format!(
                        "measured risks cover {} steps, T + 1 = {} needed",
                        r.len(),
                        horizon + 1
                    )));
                }
                (r.clone(), "measured")
            }
            None => (vec![k.c_0; horizon + 1], "a_priori"),
        };
        let last = horizon.saturating_sub(1);
        let dist = inp.reference_dist;
        let uniform = bounds::gd_stability_bound_uniform(k, n, eta, horizon);
        let r_prime = bounds::r_t_prime(k, eta, horizon, dist);
        let delta_t = match inp.delta_t {
            Some(v) => v,
            None => bounds::sgd_delta_bound(k, n, eta, last, &risks, dist)?,
        };
        let epsilon_t = (0..horizon)
            .map(|t| {
                let d = inp
                    .coupled_distances
                    .as_ref()
                    .map_or(uniform, |v| v.get(t).copied().unwrap_or(uniform));
                bounds::epsilon_t(k, eta, d)
            })
            .collect();
        let epsilon_t_prime = (0..horizon)
            .map(|t| {
                let r = inp.radii.as_ref().and_then(|v| v.get(t).copied()).unwrap_or_else(|| {
                    2.0 * (t as f64 * eta * k.c_0).sqrt()
                });
                bounds::epsilon_t_prime(k, eta, r)
            })
            .collect();
        let ws_lower = inp
            .population_risks
            .as_deref()
            .and_then(|p| bounds::ws_lower_margin(p, horizon, inp.reference_risk));
        Ok(BoundReport {
            constants: *k,
            n,
            eta,
            horizon,
            thresholds: overparam_thresholds(k, n, eta, horizon, dist),
            risk_source: risk_source.to_string(),
            risk_sum: risks[..horizon].iter().fold(0.0, |a, b| a + b),
            gen_bound_gd: bounds::gd_generalization_bound(k, n, eta, horizon, &risks)?,
            stab_bound_gd_uniform: uniform,
            stab_bound_gd_on_average_sq: bounds::gd_on_average_sq_bound(k, n, eta, horizon, &risks)?,
            stab_bound_sgd: bounds::sgd_stability_bound(k, n, eta, last, &risks)?,
            gen_bound_sgd: bounds::sgd_generalization_bound(k, n, eta, horizon, &risks, risks[horizon])?,
            r_t: bounds::gd_iterate_bound_rt(k, n, eta, horizon, &risks, dist)?,
            r_t_prime: r_prime,
            opt_bound_gd: bounds::gd_optimization_bound(
                k,
                n,
                eta,
                horizon,
                &risks,
                inp.reference_risk,
                dist,
            )?,
            opt_bound_sgd: bounds::sgd_optimization_bound(k, eta, horizon, &risks, dist, r_prime, delta_t)?,
            risk_sum_bound_gd: bounds::gd_risk_sum_bound(k, eta, horizon, inp.reference_risk, dist),
            risk_sum_bound_sgd: bounds::sgd_risk_sum_bound(k, eta, horizon, inp.reference_risk, dist, r_prime),
            delta_t,
            epsilon_t,
            epsilon_t_prime,
            surrogate_based: true,
            reference_converged: inp.reference_converged,
            assumptions_violated: inp.assumptions_violated || eta > 1.0 / (2.0 * k.rho),
            ws_lower_margin: ws_lower,
            opt_bound_gd_conditional: !ws_lower.is_some_and(|m| m >= 0.0),
        })
    }

    pub fn threshold(&self, name: &str) -> Option<&Threshold> {
        self.thresholds.iter().find(|t| t.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{certify_bounds, ActivationKind};
    use crate::theory::constants::constants;

    #[test]
    fn thresholds_vanish_as_eta_shrinks() {
        let act = certify_bounds(ActivationKind::Tanh).unwrap();
        let k = constants(&act, 1.0, 1.0, 0.5, 100, 5);
        for th in overparam_thresholds(&k, 100, 1e-9, 50, 0.5) {
            assert!(th.required_m < 1e-6, "{} = {}", th.name, th.required_m);
        }
    }

    #[test]
    fn small_width_fails_everything() {
        let act = certify_bounds(ActivationKind::Tanh).unwrap();
        let k = constants(&act, 1.0, 1.0, 0.5, 1, 5);
        assert!(overparam_thresholds(&k, 100, 0.2, 100, 1.0)
            .iter()
            .all(|t| !t.satisfied));
    }

    #[test]
    fn zero_risks_zero_gd_generalization() {
        let act = certify_bounds(ActivationKind::Tanh).unwrap();
        let k = constants(&act, 1.0, 1.0, 0.5, 100, 5);
        let rep = BoundReport::build(
            &k,
            &ReportInputs {
                n: 64,
                eta: 0.1,
                horizon: 20,
                risks: Some(vec![0.0; 21]),
                ..ReportInputs::default()
            },
        )
        .unwrap();
        assert_eq!(rep.gen_bound_gd, 0.0);
        assert_eq!(rep.epsilon_t.len(), 20);
        assert_eq!(rep.risk_source, "measured");
    }
}
