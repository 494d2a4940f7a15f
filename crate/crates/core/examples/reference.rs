//! The regularized reference W*_λ that the risk-sum and optimization bounds
//! compare against, fitted on a large held-out sample.

use snn_stability::theory::build_regularized_reference;
use snn_stability::{InitPolicy, ModelSpec, TeacherSpec};

fn main() -> snn_stability::Result<()> {
    let dist = TeacherSpec {
        d: 5,
        noise_std: 0.1,
        ..TeacherSpec::default()
    }
    .build()?;
    let init = ModelSpec {
        m: 256,
        init: InitPolicy::Zeros,
        ..ModelSpec::default()
    }
    .build(dist.d())?;
    for lambda in [1e-1, 1e-2, 1e-3] {
        let r = build_regularized_reference(&dist, lambda, &init, 10_000, 2_000, 10_000, 4)?;
        println!(
            "λ = {lambda:.0e}: L(W*_λ) = {:.5} ± {:.1e}, ‖W*_λ − W₀‖ = {:.3}, {} steps{}",
            r.surrogate_risk,
            r.surrogate_se,
            r.dist_to_init,
            r.steps,
            if r.converged { "" } else { " (not converged)" }
        );
    }
    Ok(())
}
