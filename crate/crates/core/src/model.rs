//! The shallow network f_W(x) = Σ_k μ_k φ(⟨w_k, x⟩) with fixed output
//! signs μ_k = ±1/√m, its squared loss, and first/second derivatives.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::activation::{certify_bounds, ActivationKind, ActivationSpec};
use crate::error::{LabError, Result};
use crate::seed::rng_from_seed;
use crate::weights::{dot, Weights};

/// Largest d·m for which a dense Hessian is materialized.
pub const DENSE_HESSIAN_LIMIT: usize = 2500;

/// A labelled sample z = (x, y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Example {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Example { x, y }
    }

    pub fn norm(&self) -> f64 {
        dot(&self.x, &self.x).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum SignPattern {
    /// +, -, +, -, ... (balanced when m is even).
    Alternating,
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum InitPolicy {
    Zeros,
    /// i.i.d. N(0, scale²) entries.
    Gaussian { scale: f64, seed: u64 },
    /// Columns 2j and 2j+1 share one N(0, scale²) draw. Paired with
    /// alternating signs this makes f_{W₀} ≡ 0 while breaking the symmetry
    /// that a zero start preserves.
    PairedGaussian { scale: f64, seed: u64 },
}

/// Output signs with magnitude exactly 1/√m.
pub fn make_signs(m: usize, pattern: SignPattern) -> Vec<f64> {
    let mag = 1.0 / (m as f64).sqrt();
    match pattern {
        SignPattern::Alternating => (0..m)
            .map(|k| if k % 2 == 0 { mag } else { -mag })
            .collect(),
        SignPattern::Random { seed } => {
            let mut rng = rng_from_seed(seed);
            (0..m)
                .map(|_| if rng.gen::<bool>() { mag } else { -mag })
                .collect()
        }
    }
}

pub fn make_init(d: usize, m: usize, policy: InitPolicy) -> Weights {
    match policy {
        InitPolicy::Zeros => Weights::zeros(d, m),
        InitPolicy::Gaussian { scale, seed } => {
            let mut rng = rng_from_seed(seed);
            let data = (0..d * m)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Weights::from_columns(d, m, data).expect("sized buffer")
        }
        InitPolicy::PairedGaussian { scale, seed } => {
            let mut rng = rng_from_seed(seed);
            let mut w = Weights::zeros(d, m);
            let mut k = 0;
            while k < m {
                let col: Vec<f64> = (0..d)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                w.column_mut(k).copy_from_slice(&col);
                if k + 1 < m {
                    w.column_mut(k + 1).copy_from_slice(&col);
                }
                k += 2;
            }
            w
        }
    }
}

/// Architecture of the student: width, output signs and activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    d: usize,
    signs: Vec<f64>,
    activation: ActivationSpec,
}

impl Network {
    pub fn new(d: usize, signs: Vec<f64>, activation: ActivationSpec) -> Result<Self> {
        let m = signs.len();
        if d == 0 || m == 0 {
            return Err(LabError::shape("network needs d >= 1 and m >= 1"));
        }
        let mag = 1.0 / (m as f64).sqrt();
        if let Some(bad) = signs.iter().find(|s| s.abs() != mag) {
            return Err(LabError::config(format!(
                "output sign {bad} does not have magnitude 1/sqrt({m})"
            )));
        }
        Ok(Network {
            d,
            signs,
            activation,
        })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn activation(&self) -> &ActivationSpec {
        &self.activation
    }

    pub fn check_weights(&self, w: &Weights) -> Result<()> {
        if w.d() != self.d || w.m() != self.m() {
            return Err(LabError::shape(format!(
                "weights are {}x{}, network expects {}x{}",
                w.d(),
                w.m(),
                self.d,
                self.m()
            )));
        }
        Ok(())
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(LabError::shape(format!(
                "input of length {}, expected {}",
                x.len(),
                self.d
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn forward(&self, w: &Weights, x: &[f64]) -> f64 {
        let act = &self.activation;
        w.columns()
            .zip(&self.signs)
            .map(|(col, mu)| mu * act.value(dot(col, x)))
            .sum()
    }

    #[inline]
    pub fn residual(&self, w: &Weights, z: &Example) -> f64 {
        self.forward(w, &z.x) - z.y
    }

    #[inline]
    pub fn loss(&self, w: &Weights, z: &Example) -> f64 {
        let r = self.residual(w, z);
        0.5 * r * r
    }

    /// out += scale · ∇ℓ(W; z). Returns ℓ(W; z).
    pub fn accumulate_grad(&self, w: &Weights, z: &Example, scale: f64, out: &mut Weights) -> f64 {
        let m = self.m();
        let act = &self.activation;
        let mut pre = Vec::with_capacity(m);
        let mut f = 0.0;
        for (col, mu) in w.columns().zip(&self.signs) {
            let (v, d1) = act.value_and_first(dot(col, &z.x));
            f += mu * v;
            pre.push(mu * d1);
        }
        let r = f - z.y;
        let d = self.d;
        let buf = out.as_mut_slice();
        for (k, a) in pre.iter().enumerate() {
            let c = scale * r * a;
            if c != 0.0 {
                for (o, xj) in buf[k * d..(k + 1) * d].iter_mut().zip(&z.x) {
                    *o += c * xj;
                }
            }
        }
        0.5 * r * r
    }

    pub fn grad(&self, w: &Weights, z: &Example) -> Weights {
        let mut g = Weights::zeros(self.d, self.m());
        self.accumulate_grad(w, z, 1.0, &mut g);
        g
    }

    /// Gradient of f_W(x) with respect to W (column k: μ_k φ'(⟨w_k,x⟩) x).
    pub fn output_grad(&self, w: &Weights, x: &[f64]) -> Weights {
        let mut g = Weights::zeros(self.d, self.m());
        for k in 0..self.m() {
            let a = self.signs[k] * self.activation.first(dot(w.column(k), x));
            for (o, xj) in g.column_mut(k).iter_mut().zip(x) {
                *o = a * xj;
            }
        }
        g
    }

    /// ∇²ℓ(W; z)[V] = ⟨G, V⟩ G + (f_W(x) − y) D(V).
    pub fn hvp(&self, w: &Weights, z: &Example, v: &Weights) -> Weights {
        let m = self.m();
        let act = &self.activation;
        let mut first = Vec::with_capacity(m);
        let mut second = Vec::with_capacity(m);
        let mut xv = Vec::with_capacity(m);
        let mut f = 0.0;
        let mut gv = 0.0;
        for k in 0..m {
            let mu = self.signs[k];
            let (val, d1, d2) = act.all(dot(w.column(k), &z.x));
            f += mu * val;
            let proj = dot(&z.x, v.column(k));
            gv += mu * d1 * proj;
            first.push(mu * d1);
            second.push(mu * d2);
            xv.push(proj);
        }
        let r = f - z.y;
        let mut out = Weights::zeros(self.d, m);
        for k in 0..m {
            let c = gv * first[k] + r * second[k] * xv[k];
            for (o, xj) in out.column_mut(k).iter_mut().zip(&z.x) {
                *o = c * xj;
            }
        }
        out
    }

    /// Scalars of the Hessian factorization at (W, z):
    /// ∇²ℓ = (a ⊗ x)(a ⊗ x)ᵀ + r · blockdiag(c_k x xᵀ), returned as (a, c·r, r).
    pub fn hessian_factors(&self, w: &Weights, z: &Example) -> (Vec<f64>, Vec<f64>, f64) {
        let m = self.m();
        let mut a = Vec::with_capacity(m);
        let mut c = Vec::with_capacity(m);
        let mut f = 0.0;
        for k in 0..m {
            let mu = self.signs[k];
            let (val, d1, d2) = self.activation.all(dot(w.column(k), &z.x));
            f += mu * val;
            a.push(mu * d1);
            c.push(mu * d2);
        }
        let r = f - z.y;
        c.iter_mut().for_each(|ck| *ck *= r);
        (a, c, r)
    }

    /// Dense (dm)×(dm) Hessian in the vectorized index `k * d + j`.
    pub fn dense_hessian(&self, w: &Weights, z: &Example) -> Result<DMatrix<f64>> {
        let n = self.d * self.m();
        if n > DENSE_HESSIAN_LIMIT {
            return Err(LabError::Capacity(format!(
                "dense Hessian of dimension {n} exceeds limit {DENSE_HESSIAN_LIMIT}"
            )));
        }
        let (a, c, _) = self.hessian_factors(w, z);
        let d = self.d;
        let x = &z.x;
        let mut h = DMatrix::zeros(n, n);
        for k in 0..self.m() {
            for l in 0..self.m() {
                let coef = a[k] * a[l] + if k == l { c[k] } else { 0.0 };
                if coef == 0.0 {
                    continue;
                }
                for j in 0..d {
                    for i in 0..d {
                        h[(k * d + j, l * d + i)] = coef * x[j] * x[i];
                    }
                }
            }
        }
        Ok(h)
    }

    pub fn empirical_risk(&self, w: &Weights, examples: &[Example]) -> f64 {
        let sum: f64 = examples.iter().map(|z| self.loss(w, z)).sum();
        sum / examples.len() as f64
    }

    /// Writes ∇L_S(W) into `grad` and returns L_S(W).
    pub fn risk_and_grad(&self, w: &Weights, examples: &[Example], grad: &mut Weights) -> f64 {
        grad.fill(0.0);
        let scale = 1.0 / examples.len() as f64;
        let mut risk = 0.0;
        for z in examples {
            risk += self.accumulate_grad(w, z, scale, grad);
        }
        risk * scale
    }

    /// Certified bound on sup |f_W(x)| over ‖x‖₂ ≤ c_x. Identical columns
    /// are grouped first so that cancelling ± pairs contribute nothing.
    pub fn output_sup_bound(&self, w: &Weights, c_x: f64) -> f64 {
        let mut groups: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
        for (col, mu) in w.columns().zip(&self.signs) {
            let key: Vec<u64> = col.iter().map(|v| v.to_bits()).collect();
            let norm = dot(col, col).sqrt();
            groups.entry(key).or_insert((0.0, norm)).0 += mu;
        }
        let mut keys: Vec<_> = groups.into_values().collect();
        keys.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
        keys.iter()
            .map(|(weight, norm)| {
                // group sums of ±1/√m below rounding noise are exact cancellations
                if weight.abs() < 1e-12 {
                    0.0
                } else {
                    weight.abs() * self.activation.value_sup_on_ball(norm * c_x)
                }
            })
            .sum()
    }
}

/// Declarative description of a student model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub m: usize,
    pub activation: ActivationKind,
    pub signs: SignPattern,
    pub init: InitPolicy,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            m: 256,
            activation: ActivationKind::Tanh,
            signs: SignPattern::Alternating,
            init: InitPolicy::Gaussian { scale: 0.1, seed: 0 },
        }
    }
}

impl ModelSpec {
    pub fn build(&self, d: usize) -> Result<ModelState> {
        let activation = certify_bounds(self.activation)?;
        let network = Network::new(d, make_signs(self.m, self.signs), activation)?;
        let init = make_init(d, self.m, self.init);
        ModelState::new(network, init.clone(), init)
    }
}

/// Network plus current weights W and frozen initialization W₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    network: Network,
    weights: Weights,
    init_weights: Weights,
}

impl ModelState {
    pub fn new(network: Network, weights: Weights, init_weights: Weights) -> Result<Self> {
        network.check_weights(&weights)?;
        network.check_weights(&init_weights)?;
        Ok(ModelState {
            network,
            weights,
            init_weights,
        })
    }

    /// A state at W₀ = W.
    pub fn at_init(network: Network, init: Weights) -> Result<Self> {
        Self::new(network, init.clone(), init)
    }

    /// Same network and W₀ with new current weights.
    pub fn with_weights(&self, weights: Weights) -> Result<Self> {
        self.network.check_weights(&weights)?;
        Ok(ModelState {
            network: self.network.clone(),
            weights,
            init_weights: self.init_weights.clone(),
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn init_weights(&self) -> &Weights {
        &self.init_weights
    }

    pub fn signs(&self) -> &[f64] {
        self.network.signs()
    }

    pub fn activation(&self) -> &ActivationSpec {
        self.network.activation()
    }

    pub fn d(&self) -> usize {
        self.network.d()
    }

    pub fn m(&self) -> usize {
        self.network.m()
    }

    pub fn dist_to_init(&self) -> f64 {
        self.weights.distance(&self.init_weights)
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.network.check_input(x)?;
        Ok(self.network.forward(&self.weights, x))
    }

    pub fn loss(&self, z: &Example) -> Result<f64> {
        self.network.check_input(&z.x)?;
        Ok(self.network.loss(&self.weights, z))
    }

    pub fn empirical_risk(&self, examples: &[Example]) -> Result<f64> {
        if examples.is_empty() {
            return Err(LabError::domain("empirical risk of an empty dataset"));
        }
        for z in examples {
            self.network.check_input(&z.x)?;
        }
        Ok(self.network.empirical_risk(&self.weights, examples))
    }

    pub fn grad_loss(&self, z: &Example) -> Result<Weights> {
        self.network.check_input(&z.x)?;
        Ok(self.network.grad(&self.weights, z))
    }

    pub fn hvp(&self, z: &Example, v: &Weights) -> Result<Weights> {
        self.network.check_input(&z.x)?;
        self.network.check_weights(v)?;
        Ok(self.network.hvp(&self.weights, z, v))
    }

    pub fn dense_hessian(&self, z: &Example) -> Result<DMatrix<f64>> {
        self.network.check_input(&z.x)?;
        self.network.dense_hessian(&self.weights, z)
    }

    /// Binary checkpoint: magic `SNNW`, version, activation tag, d, m
    /// (little-endian), then signs, W and W₀ as row-major f64.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"SNNW")?;
        out.write_all(&1u32.to_le_bytes())?;
        let tag: u8 = match self.activation().kind {
            ActivationKind::Sigmoid => 0,
            ActivationKind::Tanh => 1,
        };
        out.write_all(&[tag])?;
        out.write_all(&(self.d() as u64).to_le_bytes())?;
        out.write_all(&(self.m() as u64).to_le_bytes())?;
        for v in self.signs() {
            out.write_all(&v.to_le_bytes())?;
        }
        for w in [&self.weights, &self.init_weights] {
            for v in w.to_row_major() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != b"SNNW" {
            return Err(LabError::config("not a model checkpoint (bad magic)"));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != 1 {
            return Err(LabError::config("unsupported checkpoint version"));
        }
        let mut tag = [0u8; 1];
        input.read_exact(&mut tag)?;
        let kind = match tag[0] {
            0 => ActivationKind::Sigmoid,
            1 => ActivationKind::Tanh,
            t => return Err(LabError::config(format!("unknown activation tag {t}"))),
        };
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8)?;
        let d = u64::from_le_bytes(b8) as usize;
        input.read_exact(&mut b8)?;
        let m = u64::from_le_bytes(b8) as usize;
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                input.read_exact(&mut b8)?;
                v.push(f64::from_le_bytes(b8));
            }
            Ok(v)
        };
        let signs = read_vec(m)?;
        let w = Weights::from_row_major(d, m, &read_vec(d * m)?)?;
        let w0 = Weights::from_row_major(d, m, &read_vec(d * m)?)?;
        let network = Network::new(d, signs, certify_bounds(kind)?)?;
        ModelState::new(network, w, w0)
    }
}
