//! Numerical surrogate for the regularized population minimizer
//! W*_λ = argmin L(W) + λ‖W − W₀‖².

use serde::{Deserialize, Serialize};

use crate::data::{population_risk_mc, TeacherDistribution};
use crate::error::{LabError, Result};
use crate::model::{Example, ModelState};
use crate::seed::{derive_seed, rng_from_seed, Stream};
use crate::weights::Weights;

use super::constants::rho;

pub const MIN_SURROGATE_N: usize = 10_000;
pub const DEFAULT_SURROGATE_N: usize = 20_000;
pub const REFERENCE_GRAD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedReference {
    pub lambda: f64,
    pub weights: ModelState,
    /// Monte-Carlo L(Ŵ*_λ) and its standard error.
    pub surrogate_risk: f64,
    pub surrogate_se: f64,
    pub dist_to_init: f64,
    /// Surrogate for L(W*): the noise floor ½τ².
    pub l_star: f64,
    /// L(Ŵ*_λ) − L(W*) + λ‖Ŵ*_λ − W₀‖².
    pub regularity_value: f64,
    pub objective: f64,
    pub grad_norm: f64,
    pub steps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub lambda: f64,
    pub surrogate_risk: f64,
    pub surrogate_se: f64,
    pub dist_to_init: f64,
    pub l_star: f64,
    pub regularity_value: f64,
    pub objective: f64,
    pub grad_norm: f64,
    pub steps: usize,
    pub converged: bool,
}

impl RegularizedReference {
    pub fn summary(&self) -> ReferenceSummary {
        ReferenceSummary {
            lambda: self.lambda,
            surrogate_risk: self.surrogate_risk,
            surrogate_se: self.surrogate_se,
            dist_to_init: self.dist_to_init,
            l_star: self.l_star,
            regularity_value: self.regularity_value,
            objective: self.objective,
            grad_norm: self.grad_norm,
            steps: self.steps,
            converged: self.converged,
        }
    }
}

/// GD with step 1/(ρ + 2λ) on the held-out objective
/// L̂(W) + λ‖W − W₀‖², started at W₀ and stopped when the gradient norm
/// reaches 10⁻⁶ or after `max_steps`. The held-out sample and the risk
/// estimate use streams derived from `seed`.
pub fn build_regularized_reference(
    dist: &TeacherDistribution,
    lambda: f64,
    init: &ModelState,
    surrogate_n: usize,
    max_steps: usize,
    n_mc: usize,
    seed: u64,
) -> Result<RegularizedReference> {
    if surrogate_n < MIN_SURROGATE_N {
        return Err(LabError::config(format!(
            "surrogate_n = {surrogate_n} is below the floor of {MIN_SURROGATE_N}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(LabError::config("lambda must be positive and finite"));
    }
    let mut rng = rng_from_seed(derive_seed(seed, Stream::Reference, &[0]));
    let heldout: Vec<Example> = (0..surrogate_n)
        .map(|_| dist.sample_example(&mut rng))
        .collect::<Result<_>>()?;
    let net = init.network();
    let w0 = init.init_weights();
    let step = 1.0 / (rho(init.activation(), dist.c_x(), dist.c_y(), init.m()) + 2.0 * lambda);
    let mut w = w0.clone();
    let mut g = Weights::zeros(w.d(), w.m());
    let mut steps = 0;
    let mut converged = false;
    let mut objective;
    let mut grad_norm;
    loop {
        let risk = net.risk_and_grad(&w, &heldout, &mut g);
        let offset = w.sub(w0);
        g.axpy(2.0 * lambda, &offset);
        objective = risk + lambda * offset.norm_sq();
        grad_norm = g.norm();
        if grad_norm <= REFERENCE_GRAD_TOL {
            converged = true;
            break;
        }
        if steps == max_steps {
            break;
        }
        w.axpy(-step, &g);
        if !w.is_finite() {
            return Err(LabError::Divergence {
                step: steps + 1,
                message: "regularized reference diverged".into(),
            });
        }
        steps += 1;
    }
    let state = init.with_weights(w)?;
    let (surrogate_risk, surrogate_se) = population_risk_mc(
        &state,
        dist,
        n_mc,
        derive_seed(seed, Stream::Reference, &[1]),
    )?;
    let dist_to_init = state.dist_to_init();
    let l_star = dist.bayes_floor();
    Ok(RegularizedReference {
        lambda,
        regularity_value: surrogate_risk - l_star + lambda * dist_to_init * dist_to_init,
        weights: state,
        surrogate_risk,
        surrogate_se,
        dist_to_init,
        l_star,
        objective,
        grad_norm,
        steps,
        converged,
    })
}
