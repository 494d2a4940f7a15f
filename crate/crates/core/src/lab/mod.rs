//! Experiment runner behind the `snnlab` binary: configuration, the
//! property suite, stability and rate sweeps, bound tables and plain
//! training runs, each writing one output directory.
//!
//! Output layout (file names are fixed):
//!
//! | command     | files |
//! |-------------|-------|
//! | `check`     | `config.snapshot`, `summary.json` |
//! | `stability` | `config.snapshot`, `summary.json`, `per_index.csv`, `per_step.csv` |
//! | `sweep`     | `config.snapshot`, `summary.json`, `sweep.csv` or `rate.csv` |
//! | `bounds`    | `config.snapshot`, `summary.json`, `thresholds.csv`, `bounds.csv`, `bounds_by_step.csv` (with measured risks) |
//! | `train`     | `config.snapshot`, `summary.json`, `scalars.csv`, `dataset.csv`, `model.bin` |
//!
//! CSV tables are written when `csv` is among the output formats and
//! `summary.json` when `json` is.

pub mod check;
pub mod config;
pub mod output;
pub mod rate;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;

use crate::data::{certified_c0, population_risk_mc, sample_dataset, TeacherDistribution};
use crate::error::{LabError, Result};
use crate::model::{InitPolicy, ModelSpec, ModelState, SignPattern};
use crate::optim::{gd_run, sgd_run, Algorithm, IndexStream};
use crate::seed::{derive_seed, Stream};
use crate::stability::{
    estimate_on_average_stability, stability_cost, stability_scaling_sweep, StabilityOptions,
    StabilityReport, SweepTable, PATH_STORE_LIMIT_BYTES,
};
use crate::theory::bounds;
use crate::theory::constants::{constants, rho};
use crate::theory::reference::{build_regularized_reference, ReferenceSummary};
use crate::theory::report::{write_thresholds_csv, BoundReport, ReportInputs};

pub use check::{property_suite, CheckReport};
pub use config::{ExperimentConfig, NeighborPolicy, SweepKind};
pub use output::OutputDir;
pub use rate::{rate_sweep, RatePoint, RateSweepSpec, RateTable};

pub(crate) const TASK_CHECK: u64 = 1;
const TASK_STABILITY: u64 = 2;
const TASK_RATE: u64 = 3;
const TASK_TRAIN: u64 = 4;
const TASK_BOUNDS: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Stability,
    Sweep,
    Bounds,
    Train,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Stability => "stability",
            Command::Sweep => "sweep",
            Command::Bounds => "bounds",
            Command::Train => "train",
        }
    }
}

/// What a finished command reports back to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub violations: usize,
    pub steps_executed: u64,
    pub files: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.violations > 0 {
            1
        } else {
            0
        }
    }
}

/// 2 for configuration, parse, budget and input errors; 3 for numeric
/// failures and divergence.
pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::Divergence { .. }
        | LabError::Numeric { .. }
        | LabError::Capacity(_)
        | LabError::Json(_) => 3,
        _ => 2,
    }
}

/// Teacher and student at W₀. The configured teacher, sign and init seeds
/// are mixed with the master seed so that `--seed` moves every stream.
pub fn build_setup(cfg: &ExperimentConfig) -> Result<(TeacherDistribution, ModelState)> {
    let mut teacher = cfg.distribution.clone();
    teacher.seed = derive_seed(cfg.master_seed, Stream::Teacher, &[teacher.seed]);
    let dist = teacher.build()?;
    let init = resolved_model(cfg).build(teacher.d)?;
    Ok((dist, init))
}

/// The model section with its seeds mixed with the master seed.
pub fn resolved_model(cfg: &ExperimentConfig) -> ModelSpec {
    let mut model = cfg.model.clone();
    if let SignPattern::Random { seed } = model.signs {
        model.signs = SignPattern::Random {
            seed: derive_seed(cfg.master_seed, Stream::Signs, &[seed]),
        };
    }
    model.init = match model.init {
        InitPolicy::Gaussian { scale, seed } => InitPolicy::Gaussian {
            scale,
            seed: derive_seed(cfg.master_seed, Stream::Init, &[seed]),
        },
        InitPolicy::PairedGaussian { scale, seed } => InitPolicy::PairedGaussian {
            scale,
            seed: derive_seed(cfg.master_seed, Stream::Init, &[seed]),
        },
        other => other,
    };
    model
}

fn check_budget(cfg: &ExperimentConfig, planned: u64, what: &str) -> Result<()> {
    match cfg.max_steps {
        Some(limit) if planned > limit => Err(LabError::Budget(format!(
            "{what} needs {planned} optimizer steps, budget is {limit}"
        ))),
        _ => Ok(()),
    }
}

fn strict_step_check(cfg: &ExperimentConfig, init: &ModelState, dist: &TeacherDistribution) -> Result<()> {
    cfg.training
        .check_step_size(rho(init.activation(), dist.c_x(), dist.c_y(), init.m()))
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    command: &'a str,
    master_seed: u64,
    steps_executed: u64,
    #[serde(flatten)]
    body: T,
}

struct Writer<'a> {
    cfg: &'a ExperimentConfig,
    out: OutputDir,
}

impl Writer<'_> {
    fn csv<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        if self.cfg.wants("csv") {
            self.out.write_with(name, f)?;
        }
        Ok(())
    }

    fn summary<T: Serialize>(&mut self, command: Command, steps: u64, body: T) -> Result<()> {
        if self.cfg.wants("json") {
            self.out.write_json(
                "summary.json",
                &Summary {
                    command: command.name(),
                    master_seed: self.cfg.master_seed,
                    steps_executed: steps,
                    body,
                },
            )?;
        }
        Ok(())
    }
}

/// Runs `command` and writes its files under `out_dir`.
pub fn run_command(command: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome> {
    let (dist, init) = build_setup(cfg)?;
    let mut out = OutputDir::create(out_dir)?;
    out.write_bytes("config.snapshot", cfg.render().as_bytes())?;
    let mut w = Writer { cfg, out };
    let (violations, steps) = match command {
        Command::Check => cmd_check(cfg, &dist, &init, &mut w)?,
        Command::Stability => cmd_stability(cfg, &dist, &init, cfg.n, &mut w)?,
        Command::Sweep => cmd_sweep(cfg, &dist, &init, &mut w)?,
        Command::Bounds => cmd_bounds(cfg, &dist, &init, &mut w)?,
        Command::Train => cmd_train(cfg, &dist, &init, &mut w)?,
    };
    if let Some(limit) = cfg.max_steps {
        debug_assert!(steps <= limit, "executed {steps} steps over a budget of {limit}");
    }
    Ok(Outcome {
        violations,
        steps_executed: steps,
        files: w.out.written().to_vec(),
    })
}

fn cmd_check(
    cfg: &ExperimentConfig,
    dist: &TeacherDistribution,
    init: &ModelState,
    w: &mut Writer<'_>,
) -> Result<(usize, u64)> {
    strict_step_check(cfg, init, dist)?;
    check_budget(cfg, check::check_cost(cfg, true), "the property suite")?;
    let report = property_suite(cfg, dist, init)?;
    w.summary(Command::Check, report.steps_executed, &report)?;
    Ok((report.total_violations, report.steps_executed))
}

fn stability_options(cfg: &ExperimentConfig) -> StabilityOptions {
    StabilityOptions {
        identical_replacements: cfg.stability.neighbor_policy == NeighborPolicy::Identical,
        gap_mc: (cfg.stability.gap_mc > 0).then_some(cfg.stability.gap_mc),
        path_store_limit: PATH_STORE_LIMIT_BYTES,
    }
}

fn planned_stability_cost(cfg: &ExperimentConfig, init: &ModelState, n: usize, replicates: usize) -> u64 {
    let horizon = cfg.training.horizon;
    let stored = (horizon + 1) * init.d() * init.m() * 8 <= PATH_STORE_LIMIT_BYTES;
    stability_cost(n, horizon, replicates, stored)
}

fn stability_seed(cfg: &ExperimentConfig) -> u64 {
    derive_seed(cfg.master_seed, Stream::Dataset, &[TASK_STABILITY])
}

#[derive(Serialize)]
struct StabilityBody<'a> {
    on_average_sq: f64,
    on_average_se: f64,
    epsilon_hat: f64,
    max_per_index_final: f64,
    bound_gd_uniform: f64,
    bound_gd_on_avg: f64,
    bound_sgd_on_avg: f64,
    gap_mean: Option<f64>,
    gap_se: Option<f64>,
    report: &'a StabilityReport,
}

fn cmd_stability(
    cfg: &ExperimentConfig,
    dist: &TeacherDistribution,
    init: &ModelState,
    n: usize,
    w: &mut Writer<'_>,
) -> Result<(usize, u64)> {
    strict_step_check(cfg, init, dist)?;
    let reps = cfg.stability.replicates;
    check_budget(cfg, planned_stability_cost(cfg, init, n, reps), &format!("stability at n = {n}"))?;
    let rep = estimate_on_average_stability(
        dist,
        init,
        n,
        &cfg.training,
        reps,
        stability_seed(cfg),
        &stability_options(cfg),
    )?;
    w.csv("per_index.csv", |buf| rep.write_per_index_csv(buf))?;
    w.csv("per_step.csv", |buf| write_per_step_csv(&rep, buf))?;
    let gap = (!rep.gaps.is_empty()).then(|| rep.gap_mean_se());
    w.summary(
        Command::Stability,
        rep.steps_executed,
        StabilityBody {
            on_average_sq: rep.on_average_sq,
            on_average_se: rep.on_average_se,
            epsilon_hat: rep.on_average_sq.sqrt(),
            max_per_index_final: rep.max_distance_trace.last().copied().unwrap_or(0.0),
            bound_gd_uniform: rep.bound_gd_uniform,
            bound_gd_on_avg: rep.bound_gd_on_avg,
            bound_sgd_on_avg: rep.bound_sgd_on_avg,
            gap_mean: gap.map(|g| g.0),
            gap_se: gap.map(|g| g.1),
            report: &rep,
        },
    )?;
    Ok((0, rep.steps_executed))
}

/// `t,mean_sq_distance,se,max_distance,risk_mean,bound_gd_on_avg_sq,bound_sgd_on_avg_sq`;
/// the SGD bound column at t bounds W_t and is empty at t = 0.
pub fn write_per_step_csv<W: std::io::Write>(rep: &StabilityReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "mean_sq_distance",
        "se",
        "max_distance",
        "risk_mean",
        "bound_gd_on_avg_sq",
        "bound_sgd_on_avg_sq",
    ])?;
    let k = &rep.constants;
    for t in 0..=rep.horizon {
        let (_, se) = rep.on_average_at(t);
        let gd = bounds::gd_on_average_sq_bound(k, rep.n, rep.eta, t, &rep.risk_means)?;
        let sgd = if t == 0 {
            String::new()
        } else {
            bounds::sgd_stability_bound(k, rep.n, rep.eta, t - 1, &rep.risk_means)?.to_string()
        };
        w.write_record([
            t.to_string(),
            rep.per_step_trace[t].to_string(),
            se.to_string(),
            rep.max_distance_trace[t].to_string(),
            rep.risk_means[t].to_string(),
            gd.to_string(),
            sgd,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SweepBody<'a> {
    slope: f64,
    table: &'a SweepTable,
}

#[derive(Serialize)]
struct RateBody<'a> {
    slope: f64,
    strictly_decreasing: bool,
    spec: &'a RateSweepSpec,
    table: &'a RateTable,
}

fn cmd_sweep(
    cfg: &ExperimentConfig,
    dist: &TeacherDistribution,
    init: &ModelState,
    w: &mut Writer<'_>,
) -> Result<(usize, u64)> {
    let grid = &cfg.sweep.n_grid;
    match cfg.sweep.kind {
        SweepKind::Stability if grid.len() == 1 => cmd_stability(cfg, dist, init, grid[0], w),
        SweepKind::Stability => {
            strict_step_check(cfg, init, dist)?;
            let reps = cfg.sweep.replicates;
            let mut total = 0u64;
            for &n in grid {
                total += planned_stability_cost(cfg, init, n, reps);
                check_budget(cfg, total, &format!("sweep through grid point n = {n}"))?;
            }
            let table = stability_scaling_sweep(
                dist,
                init,
                grid,
                &cfg.training,
                reps,
                stability_seed(cfg),
                &stability_options(cfg),
            )?;
            let steps = table.reports.iter().map(|r| r.steps_executed).sum();
            w.csv("sweep.csv", |buf| table.write_csv(buf))?;
            w.summary(Command::Sweep, steps, SweepBody { slope: table.slope, table: &table })?;
            Ok((0, steps))
        }
        SweepKind::Rate => {
            let spec = RateSweepSpec {
                n_grid: grid.clone(),
                algorithm: cfg.training.algorithm,
                eta: cfg.training.eta,
                eta_t_per_n: cfg.sweep.eta_t_per_n,
                m_scale: cfg.sweep.m_scale,
                m_cap: cfg.sweep.m_cap,
                replicates: cfg.sweep.replicates,
                n_mc: cfg.reference.n_mc,
                stride: cfg.sweep.rate_stride,
                strict_mode: cfg.training.strict_mode,
            };
            let mut total = 0u64;
            for (&n, cost) in grid.iter().zip(rate::rate_costs(&spec)) {
                total += cost;
                check_budget(cfg, total, &format!("rate sweep through grid point n = {n}"))?;
            }
            let model = resolved_model(cfg);
            let table = rate_sweep(
                dist,
                &model,
                &spec,
                derive_seed(cfg.master_seed, Stream::Dataset, &[TASK_RATE]),
            )?;
            w.csv("rate.csv", |buf| table.write_csv(buf))?;
            w.summary(
                Command::Sweep,
                table.steps_executed,
                RateBody {
                    slope: table.slope,
                    strictly_decreasing: table.strictly_decreasing(),
                    spec: &spec,
                    table: &table,
                },
            )?;
            Ok((0, table.steps_executed))
        }
    }
}

/// Reads per-step empirical risks: the `empirical_risk` column when the
/// header has one, otherwise the first column.
pub fn read_risk_csv(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| {
        LabError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == "empirical_risk")
        .unwrap_or(0);
    let mut risks = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = rec.get(col).unwrap_or("").trim();
        let v: f64 = field.parse().map_err(|_| LabError::Parse {
            line: i + 2,
            field: "empirical_risk".into(),
            message: format!("cannot parse `{field}`"),
        })?;
        risks.push(v);
    }
    Ok(risks)
}

/// (step, population_risk, population_se) rows as written by `train`.
pub fn read_population_csv(path: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let file = File::open(path).map_err(|e| {
        LabError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| LabError::Parse {
            line: 1,
            field: name.into(),
            message: format!("{} has no `{name}` column", path.display()),
        })
    };
    let cols = [col("step")?, col("population_risk")?, col("population_se")?];
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |c: usize, name: &str| -> Result<f64> {
            let field = rec.get(c).unwrap_or("").trim();
            field.parse().map_err(|_| LabError::Parse {
                line: i + 2,
                field: name.into(),
                message: format!("cannot parse `{field}`"),
            })
        };
        let step = parse(cols[0], "step")?;
        rows.push((step as usize, parse(cols[1], "population_risk")?, parse(cols[2], "population_se")?));
    }
    Ok(rows)
}

#[derive(Serialize)]
struct BoundsBody<'a> {
    reference: Option<ReferenceSummary>,
    report: &'a BoundReport,
}

fn cmd_bounds(
    cfg: &ExperimentConfig,
    dist: &TeacherDistribution,
    init: &ModelState,
    w: &mut Writer<'_>,
) -> Result<(usize, u64)> {
    let risks = match &cfg.risk_csv {
        Some(path) => Some(read_risk_csv(Path::new(path))?),
        None => None,
    };
    let population = match &cfg.population_csv {
        Some(path) => Some(read_population_csv(Path::new(path))?),
        None => None,
    };
    let t = &cfg.training;
    let c_0 = certified_c0(init, dist.c_x(), dist.c_y());
    let k = constants(init.activation(), dist.c_x(), dist.c_y(), c_0, init.m(), init.d());
    let reference = if cfg.reference.build {
        let lambda = 1.0 / (t.eta * t.horizon.max(1) as f64);
        Some(build_regularized_reference(
            dist,
            lambda,
            init,
            cfg.reference.surrogate_n,
            cfg.reference.max_steps,
            cfg.reference.n_mc,
            derive_seed(cfg.master_seed, Stream::Reference, &[TASK_BOUNDS]),
        )?)
    } else {
        None
    };
    let inputs = ReportInputs {
        n: cfg.n,
        eta: t.eta,
        horizon: t.horizon,
        risks: risks.clone(),
        reference_dist: reference.as_ref().map_or(cfg.reference.dist, |r| r.dist_to_init),
        reference_risk: reference.as_ref().map_or(dist.bayes_floor(), |r| r.surrogate_risk),
        reference_converged: reference.as_ref().is_some_and(|r| r.converged),
        assumptions_violated: !t.strict_mode,
        population_risks: population,
        ..Default::default()
    };
    let report = BoundReport::build(&k, &inputs)?;
    w.csv("thresholds.csv", |buf| write_thresholds_csv(&report.thresholds, buf))?;
    w.csv("bounds.csv", |buf| write_bounds_csv(&report, buf))?;
    if let Some(r) = &risks {
        w.csv("bounds_by_step.csv", |buf| write_bounds_by_step_csv(&report, r, buf))?;
    }
    w.summary(
        Command::Bounds,
        0,
        BoundsBody {
            reference: reference.as_ref().map(|r| r.summary()),
            report: &report,
        },
    )?;
    Ok((0, 0))
}

fn write_bounds_csv<W: std::io::Write>(r: &BoundReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "value"])?;
    let k = &r.constants;
    let rows = [
        ("rho", k.rho),
        ("b_tilde", k.b_tilde),
        ("b_prime", k.b_prime),
        ("c_0", k.c_0),
        ("risk_sum", r.risk_sum),
        ("gen_bound_gd", r.gen_bound_gd),
        ("stab_bound_gd_uniform", r.stab_bound_gd_uniform),
        ("stab_bound_gd_on_average_sq", r.stab_bound_gd_on_average_sq),
        ("stab_bound_sgd", r.stab_bound_sgd),
        ("gen_bound_sgd", r.gen_bound_sgd),
        ("r_t", r.r_t),
        ("r_t_prime", r.r_t_prime),
        ("opt_bound_gd", r.opt_bound_gd),
        ("opt_bound_sgd", r.opt_bound_sgd),
        ("risk_sum_bound_gd", r.risk_sum_bound_gd),
        ("risk_sum_bound_sgd", r.risk_sum_bound_sgd),
        ("delta_t", r.delta_t),
    ];
    for (name, v) in rows {
        w.write_record([name.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Measured risks next to the bounds they imply at each t.
fn write_bounds_by_step_csv<W: std::io::Write>(r: &BoundReport, risks: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "empirical_risk",
        "risk_sum_before",
        "gen_bound_gd",
        "stab_bound_gd_on_average_sq",
        "stab_bound_sgd",
        "gen_bound_sgd",
    ])?;
    let k = &r.constants;
    let mut before = 0.0;
    for t in 0..=r.horizon {
        let gen_sgd = bounds::sgd_generalization_bound(k, r.n, r.eta, t, risks, risks[t])?;
        w.write_record([
            t.to_string(),
            risks[t].to_string(),
            before.to_string(),
            bounds::gd_generalization_bound(k, r.n, r.eta, t, risks)?.to_string(),
            bounds::gd_on_average_sq_bound(k, r.n, r.eta, t, risks)?.to_string(),
            bounds::sgd_stability_bound(k, r.n, r.eta, t, risks)?.to_string(),
            gen_sgd.to_string(),
        ])?;
        before += risks[t];
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TrainBody {
    algorithm: Algorithm,
    n: usize,
    eta: f64,
    horizon: usize,
    initial_risk: f64,
    final_risk: f64,
    final_dist_to_init: f64,
    c_0: f64,
    c_0_empirical: f64,
    population_risk: Option<f64>,
    population_se: Option<f64>,
}

fn cmd_train(
    cfg: &ExperimentConfig,
    dist: &TeacherDistribution,
    init: &ModelState,
    w: &mut Writer<'_>,
) -> Result<(usize, u64)> {
    let t = &cfg.training;
    check_budget(cfg, t.horizon as u64, "training")?;
    let s = sample_dataset(
        dist,
        cfg.n,
        derive_seed(cfg.master_seed, Stream::Dataset, &[TASK_TRAIN]),
        init,
    )?;
    let traj = match t.algorithm {
        Algorithm::Gd => gd_run(&s, t, init)?,
        Algorithm::Sgd => {
            let stream = IndexStream::new(
                derive_seed(cfg.master_seed, Stream::IndexStream, &[TASK_TRAIN]),
                cfg.n,
                t.horizon,
            );
            sgd_run(&s, t, init, &stream)?
        }
    };
    let pop = if cfg.stability.gap_mc > 0 {
        Some(population_risk_mc(
            &traj.final_state,
            dist,
            cfg.stability.gap_mc,
            derive_seed(cfg.master_seed, Stream::MonteCarlo, &[TASK_TRAIN]),
        )?)
    } else {
        None
    };
    w.csv("scalars.csv", |buf| traj.write_scalars_csv(buf))?;
    if cfg.reference.build {
        // common random numbers across checkpoints
        let mc_seed = derive_seed(cfg.master_seed, Stream::MonteCarlo, &[TASK_TRAIN, 1]);
        let rows = traj
            .checkpoints
            .iter()
            .map(|(&step, weights)| {
                let state = traj.final_state.with_weights(weights.clone())?;
                let (risk, se) = population_risk_mc(&state, dist, cfg.reference.n_mc, mc_seed)?;
                Ok((step, risk, se))
            })
            .collect::<Result<Vec<_>>>()?;
        w.csv("population.csv", |buf| {
            let mut out = csv::Writer::from_writer(buf);
            out.write_record(["step", "population_risk", "population_se"])?;
            for (step, risk, se) in &rows {
                out.write_record([step.to_string(), risk.to_string(), se.to_string()])?;
            }
            out.flush()?;
            Ok(())
        })?;
    }
    w.csv("dataset.csv", |buf| s.write_csv(buf))?;
    w.out.write_with("model.bin", |buf| traj.final_state.write_to(buf))?;
    let steps = traj.steps_executed as u64;
    w.summary(
        Command::Train,
        steps,
        TrainBody {
            algorithm: t.algorithm,
            n: cfg.n,
            eta: t.eta,
            horizon: t.horizon,
            initial_risk: traj.scalars.first().map_or(f64::NAN, |r| r.empirical_risk),
            final_risk: traj.scalars.last().map_or(f64::NAN, |r| r.empirical_risk),
            final_dist_to_init: traj.final_state.dist_to_init(),
            c_0: s.c_0(),
            c_0_empirical: s.c_0_empirical(),
            population_risk: pop.map(|p| p.0),
            population_se: pop.map(|p| p.1),
        },
    )?;
    Ok((0, steps))
}
