//! The property suite behind `snnlab check`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sample_dataset, TeacherDistribution};
use crate::error::Result;
use crate::model::{Example, ModelState, Network};
use crate::optim::{coupled_run_examples, run_examples, Algorithm, IndexStream, TrainConfig};
use crate::seed::{derive_seed, rng_from_seed, LabRng, Stream};
use crate::theory::checks::{
    check_curvature, cocoercivity_margin, self_bounding_margin, smoothness_margin,
    weak_convexity_margin, ViolationReport,
};
use crate::theory::constants::{constants, TheoryConstants};
use crate::weights::Weights;

use super::config::ExperimentConfig;
use super::TASK_CHECK;

/// Relative finite-difference tolerances (denominator max(|exact|, 1)).
pub const GRAD_FD_TOL: f64 = 1e-6;
pub const HVP_FD_TOL: f64 = 1e-5;
/// Dense Hessian symmetry and hvp consistency, absolute.
pub const HESSIAN_TOL: f64 = 1e-12;
/// Width used for the finite-difference and dense-Hessian instances.
pub const DERIVATIVE_WIDTH: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<ViolationReport>,
    /// Checks whose hypotheses the configuration does not meet.
    pub skipped: Vec<String>,
    pub total_checks: usize,
    pub total_violations: usize,
    /// Reported at the top level of the summary.
    #[serde(skip)]
    pub steps_executed: u64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.total_violations == 0
    }

    pub fn get(&self, name: &str) -> Option<&ViolationReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Optimizer steps the suite will execute.
pub fn check_cost(cfg: &ExperimentConfig, run_sgd: bool) -> u64 {
    let per_run = 3 * cfg.training.horizon as u64 + if run_sgd { cfg.training.horizon as u64 } else { 0 };
    cfg.check.trajectory_runs as u64 * per_run
}

fn gaussian_like(w: &Weights, rng: &mut LabRng) -> Weights {
    let data = (0..w.d() * w.m()).map(|_| rng.sample(StandardNormal)).collect();
    Weights::from_columns(w.d(), w.m(), data).expect("sized buffer")
}

/// W₀ plus a direction of uniformly random length in [0, radius].
fn random_point(w0: &Weights, radius: f64, rng: &mut LabRng) -> Weights {
    let mut g = gaussian_like(w0, rng);
    let norm = g.norm().max(1e-300);
    g.scale(radius * rng.gen::<f64>() / norm);
    let mut w = w0.clone();
    w.axpy(1.0, &g);
    w
}

fn random_example(dist: &TeacherDistribution, rng: &mut LabRng) -> Result<Example> {
    let x = dist.sample_input(rng)?;
    let y = dist.c_y() * (2.0 * rng.gen::<f64>() - 1.0);
    Ok(Example::new(x, y))
}

fn rel_err(exact: f64, approx: f64) -> f64 {
    (exact - approx).abs() / exact.abs().max(1.0)
}

/// Finite-difference and dense-Hessian oracles on a width-`DERIVATIVE_WIDTH`
/// copy of the configured architecture.
fn derivative_checks(
    net: &Network,
    dist: &TeacherDistribution,
    radius: f64,
    instances: usize,
    seed: u64,
) -> Result<Vec<ViolationReport>> {
    let small = Network::new(
        net.d(),
        crate::model::make_signs(DERIVATIVE_WIDTH, crate::model::SignPattern::Alternating),
        *net.activation(),
    )?;
    let (d, m) = (small.d(), small.m());
    let per_instance: Vec<[f64; 4]> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, Stream::Probe, &[0, i as u64]));
            let w = random_point(&Weights::zeros(d, m), radius, &mut rng);
            let z = random_example(dist, &mut rng)?;
            let g = small.grad(&w, &z);
            let h = 1e-6;
            let mut grad_err = 0f64;
            let mut probe = w.clone();
            for idx in 0..d * m {
                let orig = probe.as_slice()[idx];
                probe.as_mut_slice()[idx] = orig + h;
                let up = small.loss(&probe, &z);
                probe.as_mut_slice()[idx] = orig - h;
                let down = small.loss(&probe, &z);
                probe.as_mut_slice()[idx] = orig;
                grad_err = grad_err.max(rel_err(g.as_slice()[idx], (up - down) / (2.0 * h)));
            }
            let v = gaussian_like(&w, &mut rng);
            let hv = small.hvp(&w, &z, &v);
            let hh = 1e-5;
            let mut wp = w.clone();
            wp.axpy(hh, &v);
            let mut wm = w.clone();
            wm.axpy(-hh, &v);
            let fd = small.grad(&wp, &z).sub(&small.grad(&wm, &z));
            let hvp_err = hv
                .as_slice()
                .iter()
                .zip(fd.as_slice())
                .map(|(&e, &a)| rel_err(e, a / (2.0 * hh)))
                .fold(0f64, f64::max);
            let hess = small.dense_hessian(&w, &z)?;
            let sym_err = (&hess - hess.transpose()).abs().max();
            let hv_dense = &hess * nalgebra::DVector::from_column_slice(v.as_slice());
            let cons_err = hv_dense
                .iter()
                .zip(hv.as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0f64, f64::max);
            Ok([grad_err, hvp_err, sym_err, cons_err])
        })
        .collect::<Result<_>>()?;
    let mut reports = [
        ViolationReport::new("gradient_finite_difference"),
        ViolationReport::new("hvp_finite_difference"),
        ViolationReport::new("hessian_symmetry"),
        ViolationReport::new("hessian_hvp_consistency"),
    ];
    let tols = [GRAD_FD_TOL, HVP_FD_TOL, HESSIAN_TOL, HESSIAN_TOL];
    for errs in &per_instance {
        for ((r, e), tol) in reports.iter_mut().zip(errs).zip(tols) {
            r.record(tol - e);
        }
    }
    Ok(reports.into())
}

/// Smoothness and self-bounding over random pairs in a ball around W₀.
fn pair_checks(
    init: &ModelState,
    dist: &TeacherDistribution,
    k: &TheoryConstants,
    pairs: usize,
    radius: f64,
    seed: u64,
) -> Result<Vec<ViolationReport>> {
    let net = init.network();
    let w0 = init.init_weights();
    let margins: Vec<(f64, f64, f64)> = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_from_seed(derive_seed(seed, Stream::Probe, &[1, p as u64]));
            let w = random_point(w0, radius, &mut rng);
            // Partner offsets span several scales so both the local and
            // the far-apart regimes are exercised.
            let mut delta = gaussian_like(w0, &mut rng);
            let scale = 10f64.powf(-3.0 * rng.gen::<f64>()) * radius / delta.norm().max(1e-300);
            delta.scale(scale);
            let mut w2 = w.clone();
            w2.axpy(1.0, &delta);
            let z = random_example(dist, &mut rng)?;
            Ok((
                smoothness_margin(net, k.rho, &w, &w2, &z),
                self_bounding_margin(net, k.rho, &w, &z),
                self_bounding_margin(net, k.rho, &w2, &z),
            ))
        })
        .collect::<Result<_>>()?;
    let mut smooth = ViolationReport::new("smoothness");
    let mut selfb = ViolationReport::new("self_bounding");
    for (a, b, c) in margins {
        smooth.record(a);
        selfb.record(b);
        selfb.record(c);
    }
    Ok(vec![smooth, selfb])
}

fn curvature_checks(
    init: &ModelState,
    dist: &TeacherDistribution,
    k: &TheoryConstants,
    instances: usize,
    radius: f64,
    seed: u64,
) -> Result<ViolationReport> {
    let net = init.network();
    let w0 = init.init_weights();
    let margins: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, Stream::Probe, &[2, i as u64]));
            let w = random_point(w0, radius, &mut rng);
            let z = random_example(dist, &mut rng)?;
            Ok(check_curvature(net, k, &w, w0, &z)?.margin(k.rho))
        })
        .collect::<Result<_>>()?;
    let mut rep = ViolationReport::new("curvature");
    margins.into_iter().for_each(|m| rep.record(m));
    Ok(rep)
}

struct RunChecks {
    descent: ViolationReport,
    running_average: ViolationReport,
    iterate_radius: ViolationReport,
    self_bounding: ViolationReport,
    curvature: ViolationReport,
    weak_convexity: ViolationReport,
    cocoercivity: ViolationReport,
    sgd_crude: ViolationReport,
    steps: u64,
}

/// GD trajectory laws, trajectory curvature and pair inequalities along a
/// coupled run, and (when its width condition holds) the SGD iterate radius.
fn trajectory_checks(
    init: &ModelState,
    dist: &TeacherDistribution,
    cfg: &ExperimentConfig,
    run: usize,
    seed: u64,
    coupled_ok: bool,
    sgd_crude: Option<f64>,
) -> Result<RunChecks> {
    let r = run as u64;
    let n = cfg.n.max(2);
    let s = sample_dataset(dist, n, derive_seed(seed, Stream::Dataset, &[r]), init)?;
    let net = init.network();
    let w0 = init.init_weights();
    let k = constants(net.activation(), dist.c_x(), dist.c_y(), s.c_0(), net.m(), net.d());
    let gd = TrainConfig {
        algorithm: Algorithm::Gd,
        record_scalars: true,
        ..cfg.training.clone()
    };
    let eta = gd.eta;
    let traj = run_examples(s.examples(), &gd, init, None)?;
    let mut out = RunChecks {
        descent: ViolationReport::new("gd_descent"),
        running_average: ViolationReport::new("gd_running_average"),
        iterate_radius: ViolationReport::new("gd_iterate_radius"),
        self_bounding: ViolationReport::new("self_bounding_trajectory"),
        curvature: ViolationReport::new("curvature_trajectory"),
        weak_convexity: ViolationReport::new("weak_convexity"),
        cocoercivity: ViolationReport::new("cocoercivity"),
        sgd_crude: ViolationReport::new("sgd_crude_iterate"),
        steps: gd.horizon as u64,
    };
    let sc = &traj.scalars;
    let l0 = sc[0].empirical_risk;
    let mut sum = 0.0;
    for t in 0..sc.len() {
        if t + 1 < sc.len() {
            let g = sc[t].grad_norm;
            out.descent
                .record(sc[t].empirical_risk - eta * g * g / 2.0 - sc[t + 1].empirical_risk);
        }
        if t > 0 {
            out.running_average.record(sum / t as f64 - sc[t].empirical_risk);
        }
        sum += sc[t].empirical_risk;
        let bound = crate::theory::bounds::gd_iterate_radius(eta, t, l0);
        out.iterate_radius.record(bound - sc[t].dist_to_init);
    }
    for (&t, w) in &traj.checkpoints {
        let z = &s.examples()[t % n];
        out.self_bounding.record(self_bounding_margin(net, k.rho, w, z));
        out.curvature.record(check_curvature(net, &k, w, w0, z)?.margin(k.rho));
    }

    let i = run % n;
    let mut rng = rng_from_seed(derive_seed(seed, Stream::Replacement, &[r, i as u64]));
    let mut neighbor = s.examples().to_vec();
    neighbor[i] = dist.sample_example(&mut rng)?;
    let zi = s.examples()[i].clone();
    let mut wc = ViolationReport::new("weak_convexity");
    let mut cc = ViolationReport::new("cocoercivity");
    coupled_run_examples(s.examples(), &neighbor, &gd, init, None, |_, w, w2| {
        if coupled_ok {
            wc.record(weak_convexity_margin(net, &k, w, w2, w0, &zi));
            wc.record(weak_convexity_margin(net, &k, w2, w, w0, &zi));
            cc.record(cocoercivity_margin(net, &k, eta, w, w2, w0, &zi));
        }
    })?;
    out.weak_convexity = wc;
    out.cocoercivity = cc;
    out.steps += 2 * gd.horizon as u64;

    if let Some(radius) = sgd_crude {
        let sgd = TrainConfig {
            algorithm: Algorithm::Sgd,
            ..gd.clone()
        };
        let stream = IndexStream::new(derive_seed(seed, Stream::IndexStream, &[r]), n, sgd.horizon);
        let traj = run_examples(s.examples(), &sgd, init, Some(&stream))?;
        for rec in &traj.scalars {
            out.sgd_crude.record(radius - rec.dist_to_init);
        }
        for (&t, w) in &traj.checkpoints {
            let z = &s.examples()[stream.indices().get(t).copied().unwrap_or(0)];
            out.curvature.record(check_curvature(net, &k, w, w0, z)?.margin(k.rho));
            out.self_bounding.record(self_bounding_margin(net, k.rho, w, z));
        }
        out.steps += sgd.horizon as u64;
    }
    Ok(out)
}

/// Runs every checker the configuration admits. The training section sets
/// η, T and n for the trajectory laws; the check section sets sample sizes.
pub fn property_suite(
    cfg: &ExperimentConfig,
    dist: &TeacherDistribution,
    init: &ModelState,
) -> Result<CheckReport> {
    let seed = derive_seed(cfg.master_seed, Stream::Probe, &[TASK_CHECK]);
    let net = init.network();
    let c_0 = crate::data::certified_c0(init, dist.c_x(), dist.c_y());
    let k = constants(net.activation(), dist.c_x(), dist.c_y(), c_0, net.m(), net.d());
    let radius = cfg.check.pair_radius;
    let eta = cfg.training.eta;
    let mut skipped = Vec::new();

    let mut checks = derivative_checks(net, dist, radius, cfg.check.instances, seed)?;
    checks.extend(pair_checks(init, dist, &k, cfg.check.pairs, radius, seed)?);
    checks.push(curvature_checks(init, dist, &k, cfg.check.instances, radius, seed)?);

    let coupled_ok = eta <= 1.0 / (2.0 * k.rho);
    if !coupled_ok {
        skipped.push("weak_convexity and cocoercivity: eta exceeds 1/(2 rho)".to_string());
    }
    let horizon = cfg.training.horizon as f64;
    let crude_required = 64.0 * k.c_0 * k.b_prime * k.b_prime * (horizon * eta).powi(3);
    let sgd_crude = if (net.m() as f64) >= crude_required {
        Some(2.0 * (horizon * eta * k.c_0).sqrt())
    } else {
        skipped.push(format!(
            "sgd_crude_iterate: m = {} is below the required {crude_required:.1}",
            net.m()
        ));
        None
    };

    let runs: Vec<RunChecks> = (0..cfg.check.trajectory_runs)
        .into_par_iter()
        .map(|r| {
            trajectory_checks(init, dist, cfg, r, seed, coupled_ok, sgd_crude)
                .map_err(|e| e.with_context(&format!("trajectory run {r}")))
        })
        .collect::<Result<_>>()?;
    let mut merged = [
        ViolationReport::new("gd_descent"),
        ViolationReport::new("gd_running_average"),
        ViolationReport::new("gd_iterate_radius"),
        ViolationReport::new("self_bounding_trajectory"),
        ViolationReport::new("curvature_trajectory"),
        ViolationReport::new("weak_convexity"),
        ViolationReport::new("cocoercivity"),
        ViolationReport::new("sgd_crude_iterate"),
    ];
    let mut steps = 0;
    for r in &runs {
        let parts = [
            &r.descent,
            &r.running_average,
            &r.iterate_radius,
            &r.self_bounding,
            &r.curvature,
            &r.weak_convexity,
            &r.cocoercivity,
            &r.sgd_crude,
        ];
        for (m, p) in merged.iter_mut().zip(parts) {
            m.merge(p);
        }
        steps += r.steps;
    }
    checks.extend(merged.into_iter().filter(|r| r.checks > 0));

    let total_checks = checks.iter().map(|c| c.checks).sum();
    let total_violations = checks.iter().map(|c| c.violations).sum();
    Ok(CheckReport {
        checks,
        skipped,
        total_checks,
        total_violations,
        steps_executed: steps,
    })
}
