//! Excess risk along the low-noise schedule: ηT grows with n and the
//! width grows with (ηT)³. The realizable teacher makes L* = 0.

use snn_stability::lab::{rate_sweep, RateSweepSpec};
use snn_stability::{Algorithm, InitPolicy, ModelSpec, TeacherSpec};

fn main() -> snn_stability::Result<()> {
    let dist = TeacherSpec {
        d: 5,
        ..TeacherSpec::default()
    }
    .build()?;
    let model = ModelSpec {
        init: InitPolicy::PairedGaussian { scale: 0.5, seed: 1 },
        ..ModelSpec::default()
    };
    let spec = RateSweepSpec {
        n_grid: vec![64, 128, 256],
        algorithm: Algorithm::Gd,
        eta: 0.25,
        eta_t_per_n: 1.0 / 16.0,
        m_scale: 1.0,
        m_cap: 4096,
        replicates: 2,
        n_mc: 10_000,
        stride: 8,
        strict_mode: true,
    };
    let table = rate_sweep(&dist, &model, &spec, 11)?;
    table.write_csv(std::io::stdout())?;
    println!("strictly decreasing: {}", table.strictly_decreasing());
    Ok(())
}
