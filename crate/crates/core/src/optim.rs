//! Full-batch GD and single-sample SGD, trajectory recording and lock-step
//! coupled runs on neighboring samples.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NeighborSet};
use crate::error::{LabError, Result};
use crate::model::{Example, ModelState, Network};
use crate::seed::rng_from_seed;
use crate::theory::constants::rho;
use crate::weights::Weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Gd,
    Sgd,
}

impl std::str::FromStr for Algorithm {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gd" => Ok(Algorithm::Gd),
            "sgd" => Ok(Algorithm::Sgd),
            other => Err(LabError::config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Gd => "gd",
            Algorithm::Sgd => "sgd",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub horizon: usize,
    pub algorithm: Algorithm,
    /// Seeds the SGD index stream when none is passed explicitly.
    pub seed: u64,
    pub checkpoint_stride: usize,
    pub record_scalars: bool,
    /// Refuse η > 1/(2ρ).
    pub strict_mode: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.1,
            horizon: 100,
            algorithm: Algorithm::Gd,
            seed: 0,
            checkpoint_stride: 10,
            record_scalars: true,
            strict_mode: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(LabError::config(format!("eta = {} must be positive", self.eta)));
        }
        if self.checkpoint_stride == 0 {
            return Err(LabError::config("checkpoint_stride must be at least 1"));
        }
        Ok(())
    }

    /// Checks η ≤ 1/(2ρ) when strict mode is on.
    pub fn check_step_size(&self, rho: f64) -> Result<()> {
        self.validate()?;
        if self.strict_mode && self.eta > 1.0 / (2.0 * rho) {
            return Err(LabError::config(format!(
                "eta = {} exceeds 1/(2 rho) = {} (strict_mode is on)",
                self.eta,
                1.0 / (2.0 * rho)
            )));
        }
        Ok(())
    }
}

/// i.i.d. uniform indices i_t ∈ {0, …, n−1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStream {
    seed: u64,
    n: usize,
    indices: Vec<usize>,
}

impl IndexStream {
    pub fn new(seed: u64, n: usize, len: usize) -> Self {
        let mut rng = rng_from_seed(seed);
        let indices = (0..len).map(|_| rng.gen_range(0..n)).collect();
        IndexStream { seed, n, indices }
    }

    pub fn from_indices(n: usize, indices: Vec<usize>) -> Result<Self> {
        if let Some(bad) = indices.iter().find(|&&i| i >= n) {
            return Err(LabError::domain(format!("index {bad} outside 0..{n}")));
        }
        Ok(IndexStream { seed: 0, n, indices })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub empirical_risk: f64,
    pub grad_norm: f64,
    pub dist_to_init: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// W_t at every multiple of the stride, plus t = T.
    pub checkpoints: BTreeMap<usize, Weights>,
    /// One record per step t = 0..=T when scalars are recorded.
    pub scalars: Vec<StepRecord>,
    pub final_state: ModelState,
    pub steps_executed: usize,
}

impl Trajectory {
    pub fn checkpoint_state(&self, step: usize) -> Option<ModelState> {
        self.checkpoints
            .get(&step)
            .map(|w| self.final_state.with_weights(w.clone()).expect("shape"))
    }

    /// Σ_{j<t} L_S(W_j) from the recorded scalars.
    pub fn risk_sum_before(&self, t: usize) -> f64 {
        self.scalars[..t].iter().fold(0.0, |a, r| a + r.empirical_risk)
    }

    pub fn write_scalars_csv<W: Write>(&self, out: W) -> Result<()> {
        write_scalars_csv(&self.scalars, out)
    }
}

pub fn write_scalars_csv<W: Write>(records: &[StepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "empirical_risk", "grad_norm", "dist_to_init"])?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            r.empirical_risk.to_string(),
            r.grad_norm.to_string(),
            r.dist_to_init.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One optimizer advancing in place. GD ignores the index argument.
pub(crate) struct Runner<'a> {
    net: &'a Network,
    examples: &'a [Example],
    eta: f64,
    algorithm: Algorithm,
    pub w: Weights,
    grad: Weights,
}

impl<'a> Runner<'a> {
    pub(crate) fn new(
        net: &'a Network,
        examples: &'a [Example],
        config: &TrainConfig,
        init: &Weights,
    ) -> Self {
        Runner {
            net,
            examples,
            eta: config.eta,
            algorithm: config.algorithm,
            w: init.clone(),
            grad: Weights::zeros(init.d(), init.m()),
        }
    }

    /// Full-batch risk and gradient norm at the current iterate.
    pub(crate) fn diagnostics(&mut self) -> (f64, f64) {
        let risk = self.net.risk_and_grad(&self.w, self.examples, &mut self.grad);
        (risk, self.grad.norm())
    }

    /// W_t → W_{t+1}. For GD, returns L_S(W_t) and ‖∇L_S(W_t)‖ as a by-product.
    pub(crate) fn step(&mut self, t: usize, index: usize) -> Result<Option<(f64, f64)>> {
        let out = match self.algorithm {
            Algorithm::Gd => {
                let diag = self.diagnostics();
                self.w.axpy(-self.eta, &self.grad);
                Some(diag)
            }
            Algorithm::Sgd => {
                self.grad.fill(0.0);
                self.net
                    .accumulate_grad(&self.w, &self.examples[index], 1.0, &mut self.grad);
                self.w.axpy(-self.eta, &self.grad);
                None
            }
        };
        if !self.w.is_finite() {
            return Err(LabError::Divergence {
                step: t + 1,
                message: format!("non-finite weights after step {t} with eta = {}", self.eta),
            });
        }
        Ok(out)
    }
}

fn check_examples(net: &Network, examples: &[Example]) -> Result<()> {
    if examples.is_empty() {
        return Err(LabError::domain("training on an empty sample"));
    }
    examples.iter().try_for_each(|z| net.check_input(&z.x))
}

fn check_stream(stream: &IndexStream, n: usize, horizon: usize) -> Result<()> {
    if stream.len() < horizon {
        return Err(LabError::config(format!(
            "index stream of length {} is shorter than T = {horizon}",
            stream.len()
        )));
    }
    if let Some(bad) = stream.indices[..horizon].iter().find(|&&i| i >= n) {
        return Err(LabError::config(format!("stream index {bad} outside 0..{n}")));
    }
    Ok(())
}

fn strict_check(s: &Dataset, config: &TrainConfig, init: &ModelState) -> Result<()> {
    let (c_x, c_y, _) = s.bounds();
    config.check_step_size(rho(init.activation(), c_x, c_y, init.m()))
}

/// Runs GD or SGD on raw examples without the step-size check.
pub fn run_examples(
    examples: &[Example],
    config: &TrainConfig,
    init: &ModelState,
    stream: Option<&IndexStream>,
) -> Result<Trajectory> {
    config.validate()?;
    let net = init.network();
    check_examples(net, examples)?;
    if config.algorithm == Algorithm::Sgd {
        let stream = stream.ok_or_else(|| LabError::config("SGD needs an index stream"))?;
        check_stream(stream, examples.len(), config.horizon)?;
    }
    let w0 = init.init_weights();
    let start = init.weights();
    let mut runner = Runner::new(net, examples, config, start);
    let mut checkpoints = BTreeMap::new();
    let mut scalars = Vec::new();
    let horizon = config.horizon;
    for t in 0..=horizon {
        if t % config.checkpoint_stride == 0 || t == horizon {
            checkpoints.insert(t, runner.w.clone());
        }
        let dist = runner.w.distance(w0);
        if t == horizon {
            if config.record_scalars {
                let (risk, gn) = runner.diagnostics();
                scalars.push(record(t, risk, gn, dist));
            }
            break;
        }
        let idx = stream.map_or(0, |s| s.indices[t]);
        match config.algorithm {
            Algorithm::Gd => {
                let (risk, gn) = runner.step(t, idx)?.expect("gd diagnostics");
                if config.record_scalars {
                    scalars.push(record(t, risk, gn, dist));
                }
            }
            Algorithm::Sgd => {
                if config.record_scalars {
                    let (risk, gn) = runner.diagnostics();
                    scalars.push(record(t, risk, gn, dist));
                }
                runner.step(t, idx)?;
            }
        }
    }
    Ok(Trajectory {
        checkpoints,
        scalars,
        final_state: init.with_weights(runner.w)?,
        steps_executed: horizon,
    })
}

fn record(step: usize, empirical_risk: f64, grad_norm: f64, dist_to_init: f64) -> StepRecord {
    StepRecord {
        step,
        empirical_risk,
        grad_norm,
        dist_to_init,
    }
}

/// GD: W_{t+1} = W_t − η∇L_S(W_t) for T steps, starting from the state's
/// current weights.
pub fn gd_run(s: &Dataset, config: &TrainConfig, init: &ModelState) -> Result<Trajectory> {
    if config.algorithm != Algorithm::Gd {
        return Err(LabError::config("gd_run called with a non-GD config"));
    }
    strict_check(s, config, init)?;
    run_examples(s.examples(), config, init, None)
}

/// SGD: W_{t+1} = W_t − η∇ℓ(W_t; z_{i_t}) with indices from `stream`.
pub fn sgd_run(
    s: &Dataset,
    config: &TrainConfig,
    init: &ModelState,
    stream: &IndexStream,
) -> Result<Trajectory> {
    if config.algorithm != Algorithm::Sgd {
        return Err(LabError::config("sgd_run called with a non-SGD config"));
    }
    strict_check(s, config, init)?;
    run_examples(s.examples(), config, init, Some(stream))
}

/// Per-step ‖W_t − W_t^(i)‖₂ for t = 0..=T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTrace {
    pub distances: Vec<f64>,
    pub steps_executed: usize,
}

impl DistanceTrace {
    pub fn final_distance(&self) -> f64 {
        *self.distances.last().expect("trace includes t = 0")
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

/// Advances the runs on `a` and `b` in lock-step from the same start, with
/// the same index stream. `observe(t, W_t, W_t')` sees every pair t = 0..=T.
pub fn coupled_run_examples<F>(
    a: &[Example],
    b: &[Example],
    config: &TrainConfig,
    init: &ModelState,
    stream: Option<&IndexStream>,
    mut observe: F,
) -> Result<DistanceTrace>
where
    F: FnMut(usize, &Weights, &Weights),
{
    config.validate()?;
    if a.len() != b.len() {
        return Err(LabError::config(format!(
            "coupled samples have sizes {} and {}",
            a.len(),
            b.len()
        )));
    }
    let net = init.network();
    check_examples(net, a)?;
    check_examples(net, b)?;
    if config.algorithm == Algorithm::Sgd {
        let s = stream.ok_or_else(|| LabError::config("SGD needs an index stream"))?;
        check_stream(s, a.len(), config.horizon)?;
    }
    let mut ra = Runner::new(net, a, config, init.weights());
    let mut rb = Runner::new(net, b, config, init.weights());
    let mut distances = Vec::with_capacity(config.horizon + 1);
    for t in 0..=config.horizon {
        distances.push(ra.w.distance(&rb.w));
        observe(t, &ra.w, &rb.w);
        if t == config.horizon {
            break;
        }
        let idx = stream.map_or(0, |s| s.indices[t]);
        ra.step(t, idx)?;
        rb.step(t, idx)?;
    }
    Ok(DistanceTrace {
        distances,
        steps_executed: 2 * config.horizon,
    })
}

pub fn coupled_run(
    s: &Dataset,
    neighbor: &NeighborSet<'_>,
    config: &TrainConfig,
    init: &ModelState,
    stream: Option<&IndexStream>,
) -> Result<DistanceTrace> {
    if neighbor.base.len() != s.len() {
        return Err(LabError::config("neighbor was built from a sample of another size"));
    }
    strict_check(s, config, init)?;
    let b = neighbor.materialize();
    coupled_run_examples(s.examples(), &b, config, init, stream, |_, _, _| {})
}

/// Runs on `examples` and reports ‖W_t − reference[t]‖₂ for t = 0..=T,
/// where `reference` is a stored path of the partner run.
pub(crate) fn distances_to_path(
    examples: &[Example],
    config: &TrainConfig,
    init: &ModelState,
    stream: Option<&IndexStream>,
    reference: &[Weights],
) -> Result<Vec<f64>> {
    let net = init.network();
    let mut r = Runner::new(net, examples, config, init.weights());
    let mut out = Vec::with_capacity(config.horizon + 1);
    for (t, target) in reference.iter().enumerate().take(config.horizon + 1) {
        out.push(r.w.distance(target));
        if t == config.horizon {
            break;
        }
        let idx = stream.map_or(0, |s| s.indices[t]);
        r.step(t, idx)?;
    }
    Ok(out)
}

/// Full path W_0..=W_T together with L_S(W_t) at each step.
pub(crate) fn full_path(
    examples: &[Example],
    config: &TrainConfig,
    init: &ModelState,
    stream: Option<&IndexStream>,
) -> Result<(Vec<Weights>, Vec<f64>)> {
    let net = init.network();
    let mut r = Runner::new(net, examples, config, init.weights());
    let mut path = Vec::with_capacity(config.horizon + 1);
    let mut risks = Vec::with_capacity(config.horizon + 1);
    for t in 0..=config.horizon {
        path.push(r.w.clone());
        if t == config.horizon {
            risks.push(r.diagnostics().0);
            break;
        }
        let idx = stream.map_or(0, |s| s.indices[t]);
        match config.algorithm {
            Algorithm::Gd => risks.push(r.step(t, idx)?.expect("gd").0),
            Algorithm::Sgd => {
                risks.push(r.diagnostics().0);
                r.step(t, idx)?;
            }
        }
    }
    Ok((path, risks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::data::{neighbor_with, sample_dataset, TeacherSpec};
    use crate::model::{InitPolicy, ModelSpec, SignPattern};

    fn setup(n: usize, m: usize) -> (Dataset, ModelState) {
        let dist = TeacherSpec {
            noise_std: 0.1,
            ..TeacherSpec::default()
        }
        .build()
        .unwrap();
        let init = ModelSpec {
            m,
            activation: ActivationKind::Tanh,
            signs: SignPattern::Alternating,
            init: InitPolicy::Gaussian { scale: 0.3, seed: 4 },
        }
        .build(5)
        .unwrap();
        (sample_dataset(&dist, n, 1, &init).unwrap(), init)
    }

    #[test]
    fn one_gd_step_by_hand() {
        let (s, init) = setup(8, 6);
        let cfg = TrainConfig {
            horizon: 1,
            ..TrainConfig::default()
        };
        let traj = gd_run(&s, &cfg, &init).unwrap();
        let net = init.network();
        let mut g = Weights::zeros(5, 6);
        net.risk_and_grad(init.weights(), s.examples(), &mut g);
        let mut expected = init.weights().clone();
        expected.axpy(-0.1, &g);
        let got = traj.final_state.weights();
        for (a, b) in got.as_slice().iter().zip(expected.as_slice()) {
            assert!((a - b).abs() <= 1e-14);
        }
        assert_eq!(traj.scalars.len(), 2);
    }

    #[test]
    fn sgd_with_one_example_matches_gd() {
        let (s, init) = setup(1, 4);
        let gd = TrainConfig {
            horizon: 20,
            ..TrainConfig::default()
        };
        let sgd = TrainConfig {
            algorithm: Algorithm::Sgd,
            ..gd.clone()
        };
        let a = gd_run(&s, &gd, &init).unwrap();
        let b = sgd_run(&s, &sgd, &init, &IndexStream::new(3, 1, 20)).unwrap();
        assert_eq!(a.final_state.weights(), b.final_state.weights());
    }

    #[test]
    fn strict_mode_refuses_large_steps() {
        let (s, init) = setup(4, 4);
        let cfg = TrainConfig {
            eta: 10.0,
            ..TrainConfig::default()
        };
        assert!(matches!(gd_run(&s, &cfg, &init), Err(LabError::Config(_))));
        let lax = TrainConfig {
            strict_mode: false,
            horizon: 3,
            ..cfg
        };
        assert!(gd_run(&s, &lax, &init).is_ok());
    }

    #[test]
    fn divergence_reports_step() {
        let (_, init) = setup(4, 4);
        // overflowing pre-activations turn into NaN after one update
        let mut w = Weights::zeros(5, 4);
        w.column_mut(0)[..4].copy_from_slice(&[f64::MAX, f64::MAX, -f64::MAX, -f64::MAX]);
        let start = init.with_weights(w).unwrap();
        let z = Example::new(vec![2.0, 2.0, 2.0, 2.0, 0.0], 0.5);
        let cfg = TrainConfig {
            strict_mode: false,
            horizon: 5,
            ..TrainConfig::default()
        };
        match run_examples(&[z], &cfg, &start, None) {
            Err(LabError::Divergence { step, .. }) => assert_eq!(step, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coupled_identical_data_stays_together() {
        let (s, init) = setup(6, 4);
        let nb = neighbor_with(&s, 2, s.examples()[2].clone()).unwrap();
        let cfg = TrainConfig {
            algorithm: Algorithm::Sgd,
            horizon: 30,
            ..TrainConfig::default()
        };
        let stream = IndexStream::new(1, 6, 30);
        let trace = coupled_run(&s, &nb, &cfg, &init, Some(&stream)).unwrap();
        assert!(trace.distances.iter().all(|&d| d == 0.0));
        assert_eq!(trace.distances.len(), 31);
    }

    #[test]
    fn checkpoints_follow_stride() {
        let (s, init) = setup(4, 4);
        let cfg = TrainConfig {
            horizon: 25,
            checkpoint_stride: 10,
            ..TrainConfig::default()
        };
        let traj = gd_run(&s, &cfg, &init).unwrap();
        assert_eq!(traj.checkpoints.keys().copied().collect::<Vec<_>>(), vec![0, 10, 20, 25]);
    }

    #[test]
    fn short_stream_rejected() {
        let (s, init) = setup(4, 4);
        let cfg = TrainConfig {
            algorithm: Algorithm::Sgd,
            horizon: 10,
            ..TrainConfig::default()
        };
        assert!(sgd_run(&s, &cfg, &init, &IndexStream::new(0, 4, 5)).is_err());
    }
}
