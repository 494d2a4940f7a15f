//! Empirical on-average stability, generalization gaps and the stability
//! scaling sweep.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{mean_and_se, population_risk_mc, sample_dataset, Dataset, TeacherDistribution};
use crate::error::{LabError, Result};
use crate::model::{Example, ModelState};
use crate::optim::{
    coupled_run_examples, distances_to_path, full_path, Algorithm, IndexStream, TrainConfig,
};
use crate::seed::{derive_seed, rng_from_seed, Stream};
use crate::theory::bounds;
use crate::theory::constants::{constants, TheoryConstants};

/// Base trajectories larger than this are not stored; neighbors then run
/// in lock-step with a fresh copy of the base run.
pub const PATH_STORE_LIMIT_BYTES: usize = 256 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOptions {
    /// Force neighbor replacements equal to the originals.
    pub identical_replacements: bool,
    /// Monte-Carlo size for the generalization gap of each base run.
    pub gap_mc: Option<usize>,
    pub path_store_limit: usize,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            identical_replacements: false,
            gap_mc: None,
            path_store_limit: PATH_STORE_LIMIT_BYTES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: usize,
    pub horizon: usize,
    pub eta: f64,
    pub algorithm: Algorithm,
    pub replicates: usize,
    /// ‖A(S) − A(S^(i))‖² at t = T, averaged over replicates.
    pub per_index_sq_distance: Vec<f64>,
    /// Mean of `per_index_sq_distance`.
    pub on_average_sq: f64,
    /// Standard error of `on_average_sq` across replicates.
    pub on_average_se: f64,
    /// Mean over (replicate, i) of the squared distance at each t.
    pub per_step_trace: Vec<f64>,
    /// Per replicate, (1/n)Σ_i ‖W_t − W_t^(i)‖² for t = 0..=T.
    pub replicate_traces: Vec<Vec<f64>>,
    /// Largest ‖W_t − W_t^(i)‖ over (replicate, i) at each t.
    pub max_distance_trace: Vec<f64>,
    /// Per replicate, L_S(W_t) of the base run for t = 0..=T.
    pub replicate_risks: Vec<Vec<f64>>,
    /// Across-replicate mean of L_S(W_t).
    pub risk_means: Vec<f64>,
    /// Per-replicate generalization gap L(W_T) − L_S(W_T) when requested.
    pub gaps: Vec<f64>,
    pub constants: TheoryConstants,
    pub bound_gd_uniform: f64,
    /// Squared on-average GD bound at t = T with measured risk means.
    pub bound_gd_on_avg: f64,
    /// SGD on-average bound for W_T with measured risk means.
    pub bound_sgd_on_avg: f64,
    pub steps_executed: u64,
}

impl StabilityReport {
    /// Mean and standard error across replicates of the on-average squared
    /// distance at step t.
    pub fn on_average_at(&self, t: usize) -> (f64, f64) {
        let v: Vec<f64> = self.replicate_traces.iter().map(|r| r[t]).collect();
        mean_and_se(&v)
    }

    pub fn gap_mean_se(&self) -> (f64, f64) {
        mean_and_se(&self.gaps)
    }

    pub fn write_per_index_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "mean_sq_distance"])?;
        for (i, v) in self.per_index_sq_distance.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Optimizer steps an estimate will execute.
pub fn stability_cost(n: usize, horizon: usize, replicates: usize, stored: bool) -> u64 {
    let per_neighbor = if stored { 1 } else { 2 };
    replicates as u64 * (horizon as u64) * (1 + per_neighbor * n as u64)
}

/// Draws S and S′ for each replicate, trains on S and on every S^(i) with
/// a shared start and (for SGD) a shared index stream, and averages the
/// squared iterate distances.
pub fn estimate_on_average_stability(
    dist: &TeacherDistribution,
    init: &ModelState,
    n: usize,
    config: &TrainConfig,
    replicates: usize,
    base_seed: u64,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    if replicates == 0 {
        return Err(LabError::config("replicates must be at least 1"));
    }
    if n < 2 {
        return Err(LabError::config("stability estimation needs n >= 2"));
    }
    let horizon = config.horizon;
    let mut reps = Vec::with_capacity(replicates);
    let mut c_0 = 0.0f64;
    let mut steps = 0u64;
    for r in 0..replicates {
        let rep = run_replicate(dist, init, n, config, base_seed, r, opts)
            .map_err(|e| e.with_context(&format!("replicate {r}")))?;
        c_0 = c_0.max(rep.c_0);
        steps += rep.steps;
        reps.push(rep);
    }

    let mut per_index = vec![0.0; n];
    let mut per_step = vec![0.0; horizon + 1];
    let mut max_trace = vec![0.0f64; horizon + 1];
    let mut replicate_traces = Vec::with_capacity(replicates);
    for rep in &reps {
        let mut trace = vec![0.0; horizon + 1];
        for (i, d) in rep.distances.iter().enumerate() {
            per_index[i] += d[horizon] * d[horizon] / replicates as f64;
            for t in 0..=horizon {
                let sq = d[t] * d[t];
                trace[t] += sq / n as f64;
                per_step[t] += sq / (n * replicates) as f64;
                max_trace[t] = max_trace[t].max(d[t]);
            }
        }
        replicate_traces.push(trace);
    }
    let finals: Vec<f64> = replicate_traces.iter().map(|t| t[horizon]).collect();
    let on_average_sq = per_index.iter().sum::<f64>() / n as f64;
    let on_average_se = mean_and_se(&finals).1;
    let replicate_risks: Vec<Vec<f64>> = reps.iter().map(|r| r.risks.clone()).collect();
    let risk_means: Vec<f64> = (0..=horizon)
        .map(|t| replicate_risks.iter().map(|r| r[t]).sum::<f64>() / replicates as f64)
        .collect();
    let gaps = reps.iter().filter_map(|r| r.gap).collect();

    let (c_x, c_y) = (dist.c_x(), dist.c_y());
    let k = constants(init.activation(), c_x, c_y, c_0, init.m(), init.d());
    let eta = config.eta;
    let bound_gd_uniform = bounds::gd_stability_bound_uniform(&k, n, eta, horizon);
    let bound_gd_on_avg = bounds::gd_on_average_sq_bound(&k, n, eta, horizon, &risk_means)?;
    let bound_sgd_on_avg = if horizon == 0 {
        0.0
    } else {
        bounds::sgd_stability_bound(&k, n, eta, horizon - 1, &risk_means)?
    };
    Ok(StabilityReport {
        n,
        horizon,
        eta,
        algorithm: config.algorithm,
        replicates,
        per_index_sq_distance: per_index,
        on_average_sq,
        on_average_se,
        per_step_trace: per_step,
        replicate_traces,
        max_distance_trace: max_trace,
        replicate_risks,
        risk_means,
        gaps,
        constants: k,
        bound_gd_uniform,
        bound_gd_on_avg,
        bound_sgd_on_avg,
        steps_executed: steps,
    })
}

struct ReplicateResult {
    distances: Vec<Vec<f64>>,
    risks: Vec<f64>,
    gap: Option<f64>,
    c_0: f64,
    steps: u64,
}

fn run_replicate(
    dist: &TeacherDistribution,
    init: &ModelState,
    n: usize,
    config: &TrainConfig,
    base_seed: u64,
    r: usize,
    opts: &StabilityOptions,
) -> Result<ReplicateResult> {
    let r64 = r as u64;
    let s = sample_dataset(dist, n, derive_seed(base_seed, Stream::Dataset, &[r64]), init)?;
    let replacements: Vec<Example> = if opts.identical_replacements {
        s.examples().to_vec()
    } else {
        (0..n)
            .map(|i| {
                let mut rng =
                    rng_from_seed(derive_seed(base_seed, Stream::Replacement, &[r64, i as u64]));
                dist.sample_example(&mut rng)
            })
            .collect::<Result<_>>()?
    };
    let stream = match config.algorithm {
        Algorithm::Gd => None,
        Algorithm::Sgd => Some(IndexStream::new(
            derive_seed(base_seed, Stream::IndexStream, &[r64]),
            n,
            config.horizon,
        )),
    };
    let horizon = config.horizon;
    let path_bytes = (horizon + 1) * init.d() * init.m() * 8;
    let stored = path_bytes <= opts.path_store_limit;
    let (risks, final_w, distances) = if stored {
        let (path, risks) = full_path(s.examples(), config, init, stream.as_ref())?;
        let distances = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut ex = s.examples().to_vec();
                ex[i] = replacements[i].clone();
                distances_to_path(&ex, config, init, stream.as_ref(), &path)
                    .map_err(|e| e.with_context(&format!("neighbor {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        (risks, path[horizon].clone(), distances)
    } else {
        let base = crate::optim::run_examples(
            s.examples(),
            &TrainConfig {
                record_scalars: true,
                checkpoint_stride: horizon.max(1),
                ..config.clone()
            },
            init,
            stream.as_ref(),
        )?;
        let risks = base.scalars.iter().map(|x| x.empirical_risk).collect();
        let distances = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut ex = s.examples().to_vec();
                ex[i] = replacements[i].clone();
                coupled_run_examples(s.examples(), &ex, config, init, stream.as_ref(), |_, _, _| {})
                    .map(|t| t.distances)
                    .map_err(|e| e.with_context(&format!("neighbor {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        (risks, base.final_state.weights().clone(), distances)
    };
    let gap = match opts.gap_mc {
        Some(n_mc) => {
            let state = init.with_weights(final_w)?;
            let (g, _) = empirical_generalization_gap(
                &state,
                &s,
                dist,
                n_mc,
                derive_seed(base_seed, Stream::MonteCarlo, &[r64]),
            )?;
            Some(g)
        }
        None => None,
    };
    Ok(ReplicateResult {
        distances,
        risks,
        gap,
        c_0: s.c_0(),
        steps: stability_cost(n, horizon, 1, stored),
    })
}

/// L(W) − L_S(W) with the Monte-Carlo standard error of L(W).
pub fn empirical_generalization_gap(
    state: &ModelState,
    s: &Dataset,
    dist: &TeacherDistribution,
    n_mc: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let (pop, se) = population_risk_mc(state, dist, n_mc, seed)?;
    let emp = state.empirical_risk(s.examples())?;
    Ok((pop - emp, se))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub epsilon_hat: f64,
    pub epsilon_se: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of log ε̂ against log n.
    pub slope: f64,
    pub reports: Vec<StabilityReport>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "epsilon_hat", "epsilon_se", "bound", "slope"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.epsilon_hat.to_string(),
                r.epsilon_se.to_string(),
                r.bound.to_string(),
                self.slope.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares slope of y on x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Root on-average stability ε̂ = √(mean squared distance) and its bound
/// for each n at fixed (η, T, m). The bound column is the square root of
/// the on-average bound (GD: t = T, SGD: W_T) with measured risk means.
pub fn stability_scaling_sweep(
    dist: &TeacherDistribution,
    init: &ModelState,
    n_grid: &[usize],
    config: &TrainConfig,
    replicates: usize,
    base_seed: u64,
    opts: &StabilityOptions,
) -> Result<SweepTable> {
    if n_grid.len() < 3 {
        return Err(LabError::config("a scaling sweep needs at least three grid points"));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::config("n_grid must be strictly increasing"));
    }
    sweep_points(dist, init, n_grid, config, replicates, base_seed, opts)
}

pub(crate) fn sweep_points(
    dist: &TeacherDistribution,
    init: &ModelState,
    n_grid: &[usize],
    config: &TrainConfig,
    replicates: usize,
    base_seed: u64,
    opts: &StabilityOptions,
) -> Result<SweepTable> {
    let mut rows = Vec::with_capacity(n_grid.len());
    let mut reports = Vec::with_capacity(n_grid.len());
    for (g, &n) in n_grid.iter().enumerate() {
        let seed = derive_seed(base_seed, Stream::Dataset, &[u64::MAX, g as u64]);
        let rep = estimate_on_average_stability(dist, init, n, config, replicates, seed, opts)
            .map_err(|e| e.with_context(&format!("n = {n}")))?;
        let eps = rep.on_average_sq.sqrt();
        let se = if eps > 0.0 { rep.on_average_se / (2.0 * eps) } else { 0.0 };
        let bound = match config.algorithm {
            Algorithm::Gd => rep.bound_gd_on_avg.sqrt(),
            Algorithm::Sgd => rep.bound_sgd_on_avg.sqrt(),
        };
        rows.push(SweepRow {
            n,
            epsilon_hat: eps,
            epsilon_se: se,
            bound,
        });
        reports.push(rep);
    }
    let slope = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.epsilon_hat.ln()).collect();
        fit_slope(&x, &y)
    } else {
        f64::NAN
    };
    Ok(SweepTable {
        rows,
        slope,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::data::TeacherSpec;
    use crate::model::{InitPolicy, ModelSpec, SignPattern};

    fn setup() -> (TeacherDistribution, ModelState) {
        let dist = TeacherSpec::default().build().unwrap();
        let init = ModelSpec {
            m: 8,
            activation: ActivationKind::Tanh,
            signs: SignPattern::Alternating,
            init: InitPolicy::Zeros,
        }
        .build(5)
        .unwrap();
        (dist, init)
    }

    #[test]
    fn zero_horizon_is_perfectly_stable() {
        let (dist, init) = setup();
        let cfg = TrainConfig {
            horizon: 0,
            ..TrainConfig::default()
        };
        let rep = estimate_on_average_stability(&dist, &init, 6, &cfg, 2, 1, &Default::default())
            .unwrap();
        assert_eq!(rep.on_average_sq, 0.0);
    }

    #[test]
    fn identical_replacements_are_stable() {
        let (dist, init) = setup();
        let cfg = TrainConfig {
            horizon: 10,
            algorithm: Algorithm::Sgd,
            ..TrainConfig::default()
        };
        let opts = StabilityOptions {
            identical_replacements: true,
            ..Default::default()
        };
        let rep = estimate_on_average_stability(&dist, &init, 6, &cfg, 2, 1, &opts).unwrap();
        assert_eq!(rep.on_average_sq, 0.0);
    }

    #[test]
    fn stored_and_lockstep_paths_agree() {
        let (dist, init) = setup();
        let cfg = TrainConfig {
            horizon: 12,
            ..TrainConfig::default()
        };
        let a = estimate_on_average_stability(&dist, &init, 5, &cfg, 1, 3, &Default::default())
            .unwrap();
        let opts = StabilityOptions {
            path_store_limit: 0,
            ..Default::default()
        };
        let b = estimate_on_average_stability(&dist, &init, 5, &cfg, 1, 3, &opts).unwrap();
        assert_eq!(a.per_index_sq_distance, b.per_index_sq_distance);
        assert_eq!(a.risk_means, b.risk_means);
    }

    #[test]
    fn mean_accounting() {
        let (dist, init) = setup();
        let cfg = TrainConfig {
            horizon: 8,
            ..TrainConfig::default()
        };
        let rep = estimate_on_average_stability(&dist, &init, 7, &cfg, 2, 9, &Default::default())
            .unwrap();
        let mean = rep.per_index_sq_distance.iter().sum::<f64>() / 7.0;
        assert_eq!(rep.on_average_sq, mean);
        assert!(rep.per_step_trace[0] == 0.0);
    }

    #[test]
    fn short_grid_rejected() {
        let (dist, init) = setup();
        let err = stability_scaling_sweep(
            &dist,
            &init,
            &[8, 16],
            &TrainConfig::default(),
            1,
            0,
            &Default::default(),
        );
        assert!(matches!(err, Err(LabError::Config(_))));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 4.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 0.5, 0.25].iter().map(|v| v.ln()).collect();
        assert!((fit_slope(&x, &y) + 1.0).abs() < 1e-12);
    }
}
