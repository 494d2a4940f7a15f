//! Constants, width thresholds and the bound table for one configuration,
//! with the pessimistic c_0 substitution for the unknown risk curve.

use snn_stability::theory::{constants, write_thresholds_csv, BoundReport, ReportInputs};
use snn_stability::{certify_bounds, ActivationKind};

fn main() -> snn_stability::Result<()> {
    let act = certify_bounds(ActivationKind::Tanh)?;
    let k = constants(&act, 1.0, 1.0, 0.5, 100, 5);
    println!("ρ = {:.6}, b′ = {:.6}, b̃ = {:.6}", k.rho, k.b_prime, k.b_tilde);

    let rep = BoundReport::build(
        &k,
        &ReportInputs {
            n: 1000,
            eta: 0.1,
            horizon: 100,
            ..Default::default()
        },
    )?;
    println!("uniform GD stability {:.4}", rep.stab_bound_gd_uniform);
    println!("GD generalization (risks ≤ c_0) {:.4}", rep.gen_bound_gd);
    println!("SGD on-average stability {:.4}", rep.stab_bound_sgd);
    write_thresholds_csv(&rep.thresholds, std::io::stdout())?;
    Ok(())
}
