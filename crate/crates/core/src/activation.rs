//! Smooth activations with certified global bounds on the value and the
//! first two derivatives.
//!
//! The bounds are the analytic suprema; [`certify_bounds`] re-derives each
//! one by grid maximization before handing the spec out.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Grid used to validate the analytic bounds.
pub const CERTIFY_GRID_POINTS: usize = 1_000_000;
pub const CERTIFY_GRID_RANGE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Sigmoid => f.write_str("sigmoid"),
            ActivationKind::Tanh => f.write_str("tanh"),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigmoid" | "logistic" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            other => Err(LabError::config(format!(
                "unsupported activation `{other}` (expected sigmoid or tanh)"
            ))),
        }
    }
}

/// An activation together with bounds on |φ|, |φ'| and |φ''|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    pub b_phi: f64,
    pub b_phi1: f64,
    pub b_phi2: f64,
}

#[inline]
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl ActivationKind {
    /// Analytic suprema `(B_φ, B_φ', B_φ'')`.
    pub fn analytic_bounds(self) -> (f64, f64, f64) {
        let sqrt3 = 3f64.sqrt();
        match self {
            // sup|σ''| is attained where σ = (3 ± √3)/6.
            ActivationKind::Sigmoid => (1.0, 0.25, 1.0 / (6.0 * sqrt3)),
            // sup|tanh''| is attained where tanh² = 1/3.
            ActivationKind::Tanh => (1.0, 1.0, 4.0 / (3.0 * sqrt3)),
        }
    }
}

impl ActivationSpec {
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match self.kind {
            ActivationKind::Sigmoid => sigmoid(u),
            ActivationKind::Tanh => u.tanh(),
        }
    }

    #[inline]
    pub fn first(&self, u: f64) -> f64 {
        self.value_and_first(u).1
    }

    #[inline]
    pub fn second(&self, u: f64) -> f64 {
        self.all(u).2
    }

    #[inline]
    pub fn value_and_first(&self, u: f64) -> (f64, f64) {
        match self.kind {
            ActivationKind::Sigmoid => {
                let s = sigmoid(u);
                (s, s * (1.0 - s))
            }
            ActivationKind::Tanh => {
                let t = u.tanh();
                (t, 1.0 - t * t)
            }
        }
    }

    /// `(φ(u), φ'(u), φ''(u))` from a single transcendental evaluation.
    #[inline]
    pub fn all(&self, u: f64) -> (f64, f64, f64) {
        match self.kind {
            ActivationKind::Sigmoid => {
                let s = sigmoid(u);
                let d1 = s * (1.0 - s);
                (s, d1, d1 * (1.0 - 2.0 * s))
            }
            ActivationKind::Tanh => {
                let t = u.tanh();
                let d1 = 1.0 - t * t;
                (t, d1, -2.0 * t * d1)
            }
        }
    }

    /// φ(u); rejects non-finite input.
    pub fn eval(&self, u: f64) -> Result<f64> {
        check_finite(u)?;
        Ok(self.value(u))
    }

    pub fn deriv(&self, u: f64) -> Result<f64> {
        check_finite(u)?;
        Ok(self.first(u))
    }

    pub fn deriv2(&self, u: f64) -> Result<f64> {
        check_finite(u)?;
        Ok(self.second(u))
    }

    /// sup of |φ(u)| over |u| ≤ radius. Both shipped activations are
    /// monotone, so the supremum sits at an endpoint.
    pub fn value_sup_on_ball(&self, radius: f64) -> f64 {
        let r = radius.abs();
        self.value(r).abs().max(self.value(-r).abs())
    }
}

fn check_finite(u: f64) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(LabError::domain(format!("activation argument {u} is not finite")))
    }
}

/// Grid maxima of `(|φ|, |φ'|, |φ''|)` over `points` equispaced nodes in
/// `[-range, range]`.
pub fn grid_maxima(kind: ActivationKind, points: usize, range: f64) -> (f64, f64, f64) {
    let spec = ActivationSpec {
        kind,
        b_phi: f64::INFINITY,
        b_phi1: f64::INFINITY,
        b_phi2: f64::INFINITY,
    };
    let step = 2.0 * range / (points - 1) as f64;
    let mut max = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..points {
        let u = -range + step * k as f64;
        let (v, d1, d2) = spec.all(u);
        max.0 = max.0.max(v.abs());
        max.1 = max.1.max(d1.abs());
        max.2 = max.2.max(d2.abs());
    }
    max
}

/// Returns the spec with analytic bounds after validating them on a
/// 10⁶-point grid over [-50, 50] and at the ±∞ limits.
pub fn certify_bounds(kind: ActivationKind) -> Result<ActivationSpec> {
    let (b_phi, b_phi1, b_phi2) = kind.analytic_bounds();
    let spec = ActivationSpec {
        kind,
        b_phi,
        b_phi1,
        b_phi2,
    };
    let (g0, g1, g2) = grid_maxima(kind, CERTIFY_GRID_POINTS, CERTIFY_GRID_RANGE);
    // ±∞ limits: |φ| → 1 for both, derivatives → 0.
    let limit_value = match kind {
        ActivationKind::Sigmoid => 1.0,
        ActivationKind::Tanh => 1.0,
    };
    let slack = 1e-12;
    let ok = g0 <= b_phi + slack
        && limit_value <= b_phi + slack
        && g1 <= b_phi1 + slack
        && g2 <= b_phi2 + slack
        && [b_phi, b_phi1, b_phi2]
            .iter()
            .all(|b| b.is_finite() && *b > 0.0);
    if !ok {
        return Err(LabError::config(format!(
            "{kind}: grid maxima ({g0}, {g1}, {g2}) exceed analytic bounds ({b_phi}, {b_phi1}, {b_phi2})"
        )));
    }
    Ok(spec)
}
