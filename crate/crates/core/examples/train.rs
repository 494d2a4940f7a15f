//! Train one student by full-batch GD and by SGD on the same sample and
//! print the empirical and population risk along the way.
//!
//! ```text
//! cargo run --release --example train
//! ```

use snn_stability::data::population_risk_mc;
use snn_stability::{
    gd_run, sample_dataset, sgd_run, ActivationKind, Algorithm, IndexStream, InitPolicy,
    ModelSpec, SignPattern, TeacherSpec, TrainConfig,
};

fn main() -> snn_stability::Result<()> {
    let dist = TeacherSpec {
        d: 5,
        noise_std: 0.1,
        ..TeacherSpec::default()
    }
    .build()?;
    let init = ModelSpec {
        m: 512,
        activation: ActivationKind::Tanh,
        signs: SignPattern::Alternating,
        init: InitPolicy::Gaussian { scale: 0.1, seed: 1 },
    }
    .build(dist.d())?;
    let sample = sample_dataset(&dist, 128, 7, &init)?;

    let gd = TrainConfig {
        eta: 0.2,
        horizon: 200,
        checkpoint_stride: 50,
        ..TrainConfig::default()
    };
    let sgd = TrainConfig {
        algorithm: Algorithm::Sgd,
        ..gd.clone()
    };
    let stream = IndexStream::new(11, sample.len(), sgd.horizon);

    let runs = [
        ("gd", gd_run(&sample, &gd, &init)?),
        ("sgd", sgd_run(&sample, &sgd, &init, &stream)?),
    ];
    println!("noise floor L* ≈ {:.4}", dist.bayes_floor());
    for (name, traj) in &runs {
        println!("{name}:");
        for (&t, w) in &traj.checkpoints {
            let state = init.with_weights(w.clone())?;
            let (pop, se) = population_risk_mc(&state, &dist, 20_000, 3)?;
            println!(
                "  t = {t:>3}  L_S = {:.5}  L = {pop:.5} ± {se:.1e}  ‖W − W₀‖ = {:.3}",
                traj.scalars[t].empirical_risk, traj.scalars[t].dist_to_init
            );
        }
    }
    Ok(())
}
