//! Excess-risk sweeps along the low-noise scalings: ηT ∝ n and
//! m ∝ (ηT)³ for GD (last iterate), T ∝ n at fixed η for SGD (iterate
//! average).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{mean_and_se, population_risk_mc, sample_dataset, TeacherDistribution};
use crate::error::{LabError, Result};
use crate::model::{ModelSpec, ModelState};
use crate::optim::{run_examples, Algorithm, IndexStream, TrainConfig};
use crate::seed::{derive_seed, Stream};
use crate::stability::fit_slope;
use crate::theory::constants::rho;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSweepSpec {
    pub n_grid: Vec<usize>,
    pub algorithm: Algorithm,
    pub eta: f64,
    /// ηT = eta_t_per_n · n.
    pub eta_t_per_n: f64,
    /// m = min(m_cap, ⌈m_scale · (ηT)³⌉).
    pub m_scale: f64,
    pub m_cap: usize,
    pub replicates: usize,
    /// Monte-Carlo size for each population-risk estimate.
    pub n_mc: usize,
    /// SGD averages L(W_t) over t = 0, stride, 2·stride, … < T.
    pub stride: usize,
    pub strict_mode: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub eta: f64,
    pub horizon: usize,
    pub m: usize,
    pub excess_risk: f64,
    pub excess_se: f64,
    pub empirical_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RatePoint>,
    /// Least-squares slope of log excess risk against log n; NaN when a
    /// row has nonpositive excess risk.
    pub slope: f64,
    pub l_star: f64,
    pub steps_executed: u64,
}

impl RateTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].excess_risk < w[0].excess_risk)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "eta", "horizon", "m", "excess_risk", "excess_se", "empirical_risk", "slope"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.eta.to_string(),
                r.horizon.to_string(),
                r.m.to_string(),
                r.excess_risk.to_string(),
                r.excess_se.to_string(),
                r.empirical_risk.to_string(),
                self.slope.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// (T, m) for one grid point.
pub fn rate_schedule(spec: &RateSweepSpec, n: usize) -> (usize, usize) {
    let eta_t = spec.eta_t_per_n * n as f64;
    let horizon = (eta_t / spec.eta).round().max(1.0) as usize;
    let m = (spec.m_scale * eta_t.powi(3)).ceil().max(1.0) as usize;
    (horizon, m.min(spec.m_cap).max(1))
}

/// Optimizer steps per grid point.
pub fn rate_costs(spec: &RateSweepSpec) -> Vec<u64> {
    spec.n_grid
        .iter()
        .map(|&n| rate_schedule(spec, n).0 as u64 * spec.replicates as u64)
        .collect()
}

/// Population risks use common random numbers across the grid (the
/// Monte-Carlo stream depends on the replicate only), so differences
/// between grid points are not swamped by estimator noise.
pub fn rate_sweep(
    dist: &TeacherDistribution,
    model: &ModelSpec,
    spec: &RateSweepSpec,
    base_seed: u64,
) -> Result<RateTable> {
    if spec.replicates == 0 || spec.stride == 0 {
        return Err(LabError::config("rate sweep needs replicates >= 1 and stride >= 1"));
    }
    if spec.n_grid.is_empty() || spec.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::config("n_grid must be nonempty and strictly increasing"));
    }
    let l_star = dist.bayes_floor();
    let mut rows = Vec::with_capacity(spec.n_grid.len());
    let mut steps = 0u64;
    for (g, &n) in spec.n_grid.iter().enumerate() {
        let (horizon, m) = rate_schedule(spec, n);
        let init = ModelSpec { m, ..model.clone() }.build(dist.d())?;
        let config = TrainConfig {
            eta: spec.eta,
            horizon,
            algorithm: spec.algorithm,
            seed: 0,
            checkpoint_stride: match spec.algorithm {
                Algorithm::Gd => horizon,
                Algorithm::Sgd => spec.stride,
            },
            record_scalars: true,
            strict_mode: spec.strict_mode,
        };
        config
            .check_step_size(rho(init.activation(), dist.c_x(), dist.c_y(), m))
            .map_err(|e| e.with_context(&format!("grid point n = {n}")))?;
        let per_rep: Vec<(f64, f64)> = (0..spec.replicates)
            .into_par_iter()
            .map(|r| {
                replicate_excess(dist, &init, n, &config, spec.n_mc, base_seed, g, r)
                    .map_err(|e| e.with_context(&format!("n = {n}, replicate {r}")))
            })
            .collect::<Result<_>>()?;
        let excess: Vec<f64> = per_rep.iter().map(|p| p.0 - l_star).collect();
        let emp: Vec<f64> = per_rep.iter().map(|p| p.1).collect();
        let (excess_risk, excess_se) = mean_and_se(&excess);
        rows.push(RatePoint {
            n,
            eta: spec.eta,
            horizon,
            m,
            excess_risk,
            excess_se,
            empirical_risk: mean_and_se(&emp).0,
        });
        steps += (horizon * spec.replicates) as u64;
    }
    let slope = if rows.len() >= 2 && rows.iter().all(|r| r.excess_risk > 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.excess_risk.ln()).collect();
        fit_slope(&x, &y)
    } else {
        f64::NAN
    };
    Ok(RateTable {
        rows,
        slope,
        l_star,
        steps_executed: steps,
    })
}

/// (population risk estimate, empirical risk) of one replicate: last
/// iterate for GD, iterate average for SGD.
#[allow(clippy::too_many_arguments)]
fn replicate_excess(
    dist: &TeacherDistribution,
    init: &ModelState,
    n: usize,
    config: &TrainConfig,
    n_mc: usize,
    base_seed: u64,
    g: usize,
    r: usize,
) -> Result<(f64, f64)> {
    let (g, r) = (g as u64, r as u64);
    let s = sample_dataset(dist, n, derive_seed(base_seed, Stream::Dataset, &[g, r]), init)?;
    let mc_seed = derive_seed(base_seed, Stream::MonteCarlo, &[r]);
    match config.algorithm {
        Algorithm::Gd => {
            let traj = run_examples(s.examples(), config, init, None)?;
            let (pop, _) = population_risk_mc(&traj.final_state, dist, n_mc, mc_seed)?;
            let emp = traj.scalars.last().map_or(f64::NAN, |x| x.empirical_risk);
            Ok((pop, emp))
        }
        Algorithm::Sgd => {
            let stream = IndexStream::new(
                derive_seed(base_seed, Stream::IndexStream, &[g, r]),
                n,
                config.horizon,
            );
            let traj = run_examples(s.examples(), config, init, Some(&stream))?;
            let mut pops = Vec::new();
            let mut emps = Vec::new();
            for (&t, w) in &traj.checkpoints {
                if t >= config.horizon {
                    continue;
                }
                let state = init.with_weights(w.clone())?;
                pops.push(population_risk_mc(&state, dist, n_mc, mc_seed)?.0);
                emps.push(traj.scalars[t].empirical_risk);
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            Ok((mean(&pops), mean(&emps)))
        }
    }
}
