//! How root on-average stability shrinks with n at fixed ηT and width.
//! The fitted log-log slope should sit near −1.

use snn_stability::stability::{stability_scaling_sweep, StabilityOptions};
use snn_stability::{ModelSpec, TeacherSpec, TrainConfig};

fn main() -> snn_stability::Result<()> {
    let dist = TeacherSpec {
        d: 5,
        noise_std: 0.1,
        ..TeacherSpec::default()
    }
    .build()?;
    let init = ModelSpec {
        m: 128,
        ..ModelSpec::default()
    }
    .build(dist.d())?;
    let cfg = TrainConfig {
        eta: 0.1,
        horizon: 40,
        ..TrainConfig::default()
    };
    let table = stability_scaling_sweep(&dist, &init, &[32, 64, 128, 256], &cfg, 2, 9, &StabilityOptions::default())?;
    table.write_csv(std::io::stdout())?;
    println!("slope {:.3}", table.slope);
    Ok(())
}
