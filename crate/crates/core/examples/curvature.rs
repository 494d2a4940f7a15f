//! Derivatives and the loss landscape at a single point: gradient against a
//! central difference, Hessian extremes by three routes, and the curvature
//! and smoothness inequalities with their margins.

use snn_stability::data::certified_c0;
use snn_stability::theory::checks::{check_curvature, self_bounding_margin, smoothness_margin};
use snn_stability::theory::constants;
use snn_stability::theory::spectrum::{dense_extremes, lanczos_extremes, structured_extremes};
use snn_stability::{Example, InitPolicy, ModelSpec, Weights};

fn main() -> snn_stability::Result<()> {
    let (d, m) = (5, 40);
    let state = ModelSpec {
        m,
        init: InitPolicy::Gaussian { scale: 0.5, seed: 3 },
        ..ModelSpec::default()
    }
    .build(d)?;
    let net = state.network();
    let w0 = state.init_weights();
    let k = constants(net.activation(), 1.0, 1.0, certified_c0(&state, 1.0, 1.0), m, d);

    // a point away from initialization
    let mut w = w0.clone();
    let dir = Weights::from_columns(d, m, (0..d * m).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect())?;
    w.axpy(0.3, &dir);
    let z = Example::new(vec![0.6, -0.3, 0.2, 0.5, -0.1], 0.8);

    let g = net.grad(&w, &z);
    let h = 1e-6;
    let (mut up, mut down) = (w.clone(), w.clone());
    up.as_mut_slice()[0] += h;
    down.as_mut_slice()[0] -= h;
    let fd = (net.loss(&up, &z) - net.loss(&down, &z)) / (2.0 * h);
    println!("∂ℓ/∂W[0]: exact {:.10}  central difference {fd:.10}", g.as_slice()[0]);

    let dense = dense_extremes(net, &w, &z)?;
    let structured = structured_extremes(net, &w, &z);
    let lanczos = lanczos_extremes(net, &w, &z, 120, &dir)?;
    for e in [dense, structured, lanczos] {
        println!("{:?}: λ_min = {:+.3e}, λ_max = {:+.3e}", e.method, e.lambda_min, e.lambda_max);
    }

    let c = check_curvature(net, &k, &w, w0, &z)?;
    println!("ρ = {:.4}", k.rho);
    println!(
        "λ_min lower bounds: residual {:+.3e}, radius {:+.3e}; margin {:.3e}",
        c.bound_residual,
        c.bound_radius,
        c.margin(k.rho)
    );
    println!("smoothness margin {:.3e}", smoothness_margin(net, k.rho, &w, w0, &z));
    println!("self-bounding margin {:.3e}", self_bounding_margin(net, k.rho, &w, &z));
    Ok(())
}
