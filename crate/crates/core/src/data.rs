//! Synthetic teacher-network distributions, datasets with certified bounds,
//! neighbor construction and Monte-Carlo population risk.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::{certify_bounds, ActivationKind};
use crate::error::{LabError, Result};
use crate::model::{make_signs, Example, ModelState, Network, SignPattern};
use crate::seed::{derive_seed, rng_from_seed, LabRng, Stream};
use crate::weights::{dot, Weights};

/// Smallest Monte-Carlo sample accepted by [`population_risk_mc`].
pub const MIN_MC_SAMPLES: usize = 1000;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;
const MC_CHUNK: usize = 4096;
const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InputLaw {
    /// Uniform on the sphere ‖x‖₂ = radius.
    Sphere { radius: f64 },
    /// N(0, scale² I) conditioned on ‖x‖₂ ≤ c_x (by rejection).
    TruncatedGaussian { scale: f64 },
}

/// Declarative teacher: `m_teacher` neurons with Gaussian directions
/// rescaled to `neuron_norm`, alternating output signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherSpec {
    pub d: usize,
    pub m_teacher: usize,
    pub activation: ActivationKind,
    pub neuron_norm: f64,
    pub seed: u64,
    pub input_law: InputLaw,
    pub noise_std: f64,
    pub c_x: f64,
    pub c_y: f64,
}

impl Default for TeacherSpec {
    fn default() -> Self {
        TeacherSpec {
            d: 5,
            m_teacher: 2,
            activation: ActivationKind::Tanh,
            neuron_norm: 0.8,
            seed: 0,
            input_law: InputLaw::Sphere { radius: 1.0 },
            noise_std: 0.0,
            c_x: 1.0,
            c_y: 1.0,
        }
    }
}

impl TeacherSpec {
    pub fn build(&self) -> Result<TeacherDistribution> {
        if self.d == 0 || self.m_teacher == 0 {
            return Err(LabError::config("teacher needs d >= 1 and m_teacher >= 1"));
        }
        if !(self.neuron_norm >= 0.0) {
            return Err(LabError::config("teacher neuron_norm must be nonnegative"));
        }
        let mut rng = rng_from_seed(derive_seed(self.seed, Stream::Teacher, &[]));
        let mut w = Weights::zeros(self.d, self.m_teacher);
        for k in 0..self.m_teacher {
            let col = w.column_mut(k);
            loop {
                col.iter_mut()
                    .for_each(|v| *v = rng.sample::<f64, _>(StandardNormal));
                let norm = dot(col, col).sqrt();
                if norm > 1e-12 {
                    col.iter_mut().for_each(|v| *v *= self.neuron_norm / norm);
                    break;
                }
            }
        }
        let network = Network::new(
            self.d,
            make_signs(self.m_teacher, SignPattern::Alternating),
            certify_bounds(self.activation)?,
        )?;
        let teacher = ModelState::at_init(network, w)?;
        TeacherDistribution::new(teacher, self.input_law, self.noise_std, self.c_x, self.c_y)
    }
}

/// The data law P: x from `input_law`, y = clip(f_teacher(x) + τξ, ±c_y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherDistribution {
    teacher: ModelState,
    input_law: InputLaw,
    noise_std: f64,
    c_x: f64,
    c_y: f64,
}

impl TeacherDistribution {
    pub fn new(
        teacher: ModelState,
        input_law: InputLaw,
        noise_std: f64,
        c_x: f64,
        c_y: f64,
    ) -> Result<Self> {
        if !(c_x > 0.0 && c_y > 0.0 && c_x.is_finite() && c_y.is_finite()) {
            return Err(LabError::config("c_x and c_y must be positive and finite"));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(LabError::config("noise_std must be nonnegative"));
        }
        match input_law {
            InputLaw::Sphere { radius } if !(radius > 0.0 && radius <= c_x) => {
                return Err(LabError::config(format!(
                    "sphere radius {radius} must lie in (0, c_x = {c_x}]"
                )))
            }
            InputLaw::TruncatedGaussian { scale } if !(scale > 0.0 && scale.is_finite()) => {
                return Err(LabError::config("truncated Gaussian scale must be positive"))
            }
            _ => {}
        }
        let sup = teacher.network().output_sup_bound(teacher.weights(), c_x);
        if noise_std == 0.0 && sup > c_y {
            return Err(LabError::config(format!(
                "noiseless teacher output bound {sup} exceeds c_y = {c_y}; labels would be clipped"
            )));
        }
        Ok(TeacherDistribution {
            teacher,
            input_law,
            noise_std,
            c_x,
            c_y,
        })
    }

    pub fn teacher(&self) -> &ModelState {
        &self.teacher
    }

    pub fn input_law(&self) -> InputLaw {
        self.input_law
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn c_x(&self) -> f64 {
        self.c_x
    }

    pub fn c_y(&self) -> f64 {
        self.c_y
    }

    pub fn d(&self) -> usize {
        self.teacher.d()
    }

    /// ½E[ξ²] for the unclipped noise, the risk of the teacher itself.
    pub fn bayes_floor(&self) -> f64 {
        0.5 * self.noise_std * self.noise_std
    }

    pub fn sample_input(&self, rng: &mut LabRng) -> Result<Vec<f64>> {
        let d = self.d();
        let mut x = vec![0.0; d];
        match self.input_law {
            InputLaw::Sphere { radius } => loop {
                x.iter_mut()
                    .for_each(|v| *v = rng.sample::<f64, _>(StandardNormal));
                let norm = dot(&x, &x).sqrt();
                if norm > 1e-12 {
                    x.iter_mut().for_each(|v| *v *= radius / norm);
                    // guard the rounding of the rescale
                    if dot(&x, &x).sqrt() > self.c_x {
                        x.iter_mut().for_each(|v| *v *= 1.0 - 1e-15);
                    }
                    return Ok(x);
                }
            },
            InputLaw::TruncatedGaussian { scale } => {
                for _ in 0..MAX_REJECTIONS {
                    x.iter_mut()
                        .for_each(|v| *v = scale * rng.sample::<f64, _>(StandardNormal));
                    if dot(&x, &x).sqrt() <= self.c_x {
                        return Ok(x);
                    }
                }
                Err(LabError::config(format!(
                    "truncated Gaussian with scale {scale} rarely lands in the c_x = {} ball",
                    self.c_x
                )))
            }
        }
    }

    pub fn sample_example(&self, rng: &mut LabRng) -> Result<Example> {
        let x = self.sample_input(rng)?;
        let clean = self.teacher.network().forward(self.teacher.weights(), &x);
        let y = if self.noise_std > 0.0 {
            let noise: f64 = rng.sample(StandardNormal);
            (clean + self.noise_std * noise).clamp(-self.c_y, self.c_y)
        } else {
            clean.clamp(-self.c_y, self.c_y)
        };
        Ok(Example { x, y })
    }
}

/// A training sample S with its certified bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    examples: Vec<Example>,
    seed: u64,
    c_x: f64,
    c_y: f64,
    /// Certified sup_z ℓ(W₀; z) over the bounded data domain.
    c_0: f64,
    /// max_i ℓ(W₀; z_i), never above `c_0`.
    c_0_empirical: f64,
}

impl Dataset {
    /// Validates ‖x‖ ≤ c_x and |y| ≤ c_y on every example and certifies C₀
    /// for the initialization of `init`.
    pub fn new(examples: Vec<Example>, seed: u64, c_x: f64, c_y: f64, init: &ModelState) -> Result<Self> {
        if examples.is_empty() {
            return Err(LabError::domain("a dataset needs at least one example"));
        }
        let net = init.network();
        for (i, z) in examples.iter().enumerate() {
            net.check_input(&z.x)
                .map_err(|e| e.with_context(&format!("example {i}")))?;
            if !(z.norm() <= c_x * (1.0 + 1e-12)) || !(z.y.abs() <= c_y) {
                return Err(LabError::domain(format!(
                    "example {i} violates the data bounds (|x| = {}, |y| = {})",
                    z.norm(),
                    z.y.abs()
                )));
            }
        }
        let c_0 = certified_c0(init, c_x, c_y);
        let c_0_empirical = examples
            .iter()
            .map(|z| net.loss(init.init_weights(), z))
            .fold(0.0, f64::max);
        Ok(Dataset {
            examples,
            seed,
            c_x,
            c_y,
            c_0: c_0.max(c_0_empirical),
            c_0_empirical,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bounds(&self) -> (f64, f64, f64) {
        (self.c_x, self.c_y, self.c_0)
    }

    pub fn c_0(&self) -> f64 {
        self.c_0
    }

    pub fn c_0_empirical(&self) -> f64 {
        self.c_0_empirical
    }

    pub fn d(&self) -> usize {
        self.examples[0].x.len()
    }

    /// CSV with header `x_0,...,x_{d-1},y`, floats in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_examples_csv(&self.examples, out)
    }
}

/// ½(sup|f_{W₀}| + c_y)², a bound on ℓ(W₀; z) for every admissible z.
pub fn certified_c0(init: &ModelState, c_x: f64, c_y: f64) -> f64 {
    let f0 = init.network().output_sup_bound(init.init_weights(), c_x);
    0.5 * (f0 + c_y) * (f0 + c_y)
}

pub fn write_examples_csv<W: Write>(examples: &[Example], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = examples.first().map_or(0, |z| z.x.len());
    let mut header: Vec<String> = (0..d).map(|j| format!("x_{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for z in examples {
        let mut row: Vec<String> = z.x.iter().map(|v| v.to_string()).collect();
        row.push(z.y.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_examples_csv<R: Read>(input: R) -> Result<Vec<Example>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let cols = header.len();
    let valid = cols >= 2
        && header.get(cols - 1) == Some("y")
        && (0..cols - 1).all(|j| header.get(j) == Some(format!("x_{j}").as_str()));
    if !valid {
        return Err(LabError::Parse {
            line: 1,
            field: "header".into(),
            message: "expected x_0,...,x_{d-1},y".into(),
        });
    }
    let mut examples = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut vals = Vec::with_capacity(cols);
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| LabError::Parse {
                line: row + 2,
                field: header.get(j).unwrap_or("?").to_string(),
                message: format!("`{cell}` is not a number"),
            })?;
            vals.push(v);
        }
        let y = vals.pop().expect("at least two columns");
        examples.push(Example { x: vals, y });
    }
    Ok(examples)
}

pub fn sample_dataset(
    dist: &TeacherDistribution,
    n: usize,
    seed: u64,
    init: &ModelState,
) -> Result<Dataset> {
    if n == 0 {
        return Err(LabError::domain("cannot sample a dataset with n = 0"));
    }
    let mut rng = rng_from_seed(seed);
    let examples = (0..n)
        .map(|_| dist.sample_example(&mut rng))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(examples, seed, dist.c_x(), dist.c_y(), init)
}

/// S^(i): the base sample with position `index` (0-based) replaced.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet<'a> {
    pub base: &'a Dataset,
    pub replacement_index: usize,
    pub replacement: Example,
}

impl NeighborSet<'_> {
    pub fn example(&self, j: usize) -> &Example {
        if j == self.replacement_index {
            &self.replacement
        } else {
            &self.base.examples[j]
        }
    }

    pub fn materialize(&self) -> Vec<Example> {
        let mut v = self.base.examples.clone();
        v[self.replacement_index] = self.replacement.clone();
        v
    }
}

/// Draws z′_i from `dist` using `seed` alone.
pub fn make_neighbor<'a>(
    base: &'a Dataset,
    dist: &TeacherDistribution,
    index: usize,
    seed: u64,
) -> Result<NeighborSet<'a>> {
    let mut rng = rng_from_seed(seed);
    let replacement = dist.sample_example(&mut rng)?;
    neighbor_with(base, index, replacement)
}

pub fn neighbor_with(base: &Dataset, index: usize, replacement: Example) -> Result<NeighborSet<'_>> {
    if index >= base.len() {
        return Err(LabError::domain(format!(
            "replacement index {index} outside 0..{}",
            base.len()
        )));
    }
    if replacement.x.len() != base.d() {
        return Err(LabError::shape("replacement example has the wrong dimension"));
    }
    Ok(NeighborSet {
        base,
        replacement_index: index,
        replacement,
    })
}

/// Mean of ℓ(W; z) over `n_mc` fresh draws and its standard error. Draws
/// come in fixed-size chunks with their own derived seeds, so the result
/// does not depend on the thread count.
pub fn population_risk_mc(
    state: &ModelState,
    dist: &TeacherDistribution,
    n_mc: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_mc < MIN_MC_SAMPLES {
        return Err(LabError::config(format!(
            "n_mc = {n_mc} is below the floor of {MIN_MC_SAMPLES}"
        )));
    }
    if state.d() != dist.d() {
        return Err(LabError::shape("model and distribution dimensions differ"));
    }
    let chunks = n_mc.div_ceil(MC_CHUNK);
    let net = state.network();
    let w = state.weights();
    let losses: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(n_mc - c * MC_CHUNK);
            let mut rng = rng_from_seed(derive_seed(seed, Stream::MonteCarlo, &[c as u64]));
            (0..len)
                .map(|_| dist.sample_example(&mut rng).map(|z| net.loss(w, &z)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let all: Vec<f64> = losses.into_iter().flatten().collect();
    Ok(mean_and_se(&all))
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitPolicy, ModelSpec};

    fn zero_student(d: usize) -> ModelState {
        ModelSpec {
            m: 4,
            activation: ActivationKind::Tanh,
            signs: SignPattern::Alternating,
            init: InitPolicy::Zeros,
        }
        .build(d)
        .unwrap()
    }

    #[test]
    fn realizable_labels_are_exact() {
        let dist = TeacherSpec::default().build().unwrap();
        let s = sample_dataset(&dist, 50, 9, &zero_student(5)).unwrap();
        for z in s.examples() {
            assert_eq!(z.y, dist.teacher().forward(&z.x).unwrap());
            assert!(z.norm() <= 1.0);
        }
        assert_eq!(s.c_0(), 0.5);
    }

    #[test]
    fn deterministic_sampling() {
        let dist = TeacherSpec {
            noise_std: 0.2,
            input_law: InputLaw::TruncatedGaussian { scale: 0.5 },
            ..TeacherSpec::default()
        }
        .build()
        .unwrap();
        let init = zero_student(5);
        let a = sample_dataset(&dist, 20, 3, &init).unwrap();
        let b = sample_dataset(&dist, 20, 3, &init).unwrap();
        assert_eq!(a, b);
        assert!(a.examples().iter().all(|z| z.y.abs() <= 1.0 && z.norm() <= 1.0));
    }

    #[test]
    fn zero_n_is_domain_error() {
        let dist = TeacherSpec::default().build().unwrap();
        assert!(matches!(
            sample_dataset(&dist, 0, 1, &zero_student(5)),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn unclippable_teacher_rejected() {
        let spec = TeacherSpec {
            m_teacher: 16,
            neuron_norm: 3.0,
            ..TeacherSpec::default()
        };
        assert!(matches!(spec.build(), Err(LabError::Config(_))));
    }

    #[test]
    fn neighbor_differs_in_one_place() {
        let dist = TeacherSpec::default().build().unwrap();
        let s = sample_dataset(&dist, 10, 1, &zero_student(5)).unwrap();
        let nb = make_neighbor(&s, &dist, 0, 77).unwrap();
        let v = nb.materialize();
        let diffs = (0..10).filter(|&j| v[j] != s.examples()[j]).count();
        assert_eq!(diffs, 1);
        let same = neighbor_with(&s, 3, s.examples()[3].clone()).unwrap();
        assert_eq!(same.materialize(), s.examples());
        assert!(make_neighbor(&s, &dist, 10, 1).is_err());
    }

    #[test]
    fn teacher_risk_is_zero_when_noiseless() {
        let dist = TeacherSpec::default().build().unwrap();
        let (est, se) = population_risk_mc(dist.teacher(), &dist, 2000, 5).unwrap();
        assert_eq!((est, se), (0.0, 0.0));
        assert!(matches!(
            population_risk_mc(dist.teacher(), &dist, 999, 5),
            Err(LabError::Config(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let dist = TeacherSpec {
            noise_std: 0.1,
            ..TeacherSpec::default()
        }
        .build()
        .unwrap();
        let s = sample_dataset(&dist, 7, 2, &zero_student(5)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_0,x_1,x_2,x_3,x_4,y\n"));
        assert_eq!(read_examples_csv(buf.as_slice()).unwrap(), s.examples());
    }

    #[test]
    fn csv_bad_cell_reports_line() {
        let text = "x_0,y\n0.1,0.2\n0.3,abc\n";
        match read_examples_csv(text.as_bytes()) {
            Err(LabError::Parse { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
