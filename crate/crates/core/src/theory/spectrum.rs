//! Extreme eigenvalues of the per-example Hessian ∇²ℓ(W; z).
//!
//! The Hessian factors as (a ⊗ x)(a ⊗ x)ᵀ + blockdiag(c_k x xᵀ) with
//! a_k = μ_kφ'(u_k) and c_k = (f − y)μ_kφ''(u_k). On the span of the blocks
//! e_k ⊗ x it acts as ‖x‖²(diag(c) + aaᵀ); on the complement it is zero.
//! The structured route solves the secular equation of that diagonal plus
//! rank-one matrix, which is exact and costs O(m) per bisection step.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::{Example, Network, DENSE_HESSIAN_LIMIT};
use crate::weights::{dot, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    Structured,
    Lanczos,
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub method: EigenMethod,
}

pub fn dense_extremes(net: &Network, w: &Weights, z: &Example) -> Result<Extremes> {
    let h = net.dense_hessian(w, z)?;
    let eig = SymmetricEigen::new(h);
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Extremes {
        lambda_min,
        lambda_max,
        method: EigenMethod::Dense,
    })
}

/// Exact extremes via the secular equation.
pub fn structured_extremes(net: &Network, w: &Weights, z: &Example) -> Extremes {
    let (a, c, _) = net.hessian_factors(w, z);
    let xx = dot(&z.x, &z.x);
    let (lo, hi) = rank_one_extremes(&c, &a);
    let (mut lambda_min, mut lambda_max) = (xx * lo, xx * hi);
    if net.d() > 1 || xx == 0.0 {
        lambda_min = lambda_min.min(0.0);
        lambda_max = lambda_max.max(0.0);
    }
    Extremes {
        lambda_min,
        lambda_max,
        method: EigenMethod::Structured,
    }
}

/// Smallest and largest eigenvalue of diag(c) + aaᵀ.
pub fn rank_one_extremes(c: &[f64], a: &[f64]) -> (f64, f64) {
    let mut poles: Vec<(f64, f64)> = c.iter().copied().zip(a.iter().map(|v| v * v)).collect();
    poles.sort_by(|p, q| p.0.total_cmp(&q.0));
    // merge equal diagonal entries; each merge leaves a deflated eigenvalue
    // at that entry
    let mut merged: Vec<(f64, f64, usize)> = Vec::new();
    for (ck, wk) in poles {
        match merged.last_mut() {
            Some(last) if last.0 == ck => {
                last.1 += wk;
                last.2 += 1;
            }
            _ => merged.push((ck, wk, 1)),
        }
    }
    let weighted: Vec<(f64, f64)> = merged
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|p| (p.0, p.1))
        .collect();
    let total: f64 = weighted.iter().map(|p| p.1).sum();
    let first = merged[0];
    let last = *merged.last().expect("nonempty");

    let lambda_min = if first.2 > 1 || first.1 == 0.0 || weighted.is_empty() {
        first.0
    } else {
        let lo = weighted[0].0;
        let hi = weighted.get(1).map_or(lo + total, |p| p.0);
        secular_root(&weighted, lo, hi)
    };
    let lambda_max = if weighted.is_empty() {
        last.0
    } else {
        let k = weighted.len() - 1;
        let hi = weighted[k].0 + total;
        let lo = weighted[k].0;
        let root = secular_root(&weighted, lo, hi);
        root.max(last.0)
    };
    (lambda_min, lambda_max)
}

/// Root of 1 + Σ w_k/(c_k − λ) in the open interval (lo, hi), where the
/// function increases monotonically.
fn secular_root(poles: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let f = |lam: f64| 1.0 + poles.iter().map(|(c, w)| w / (c - lam)).sum::<f64>();
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest d·m routed to the dense eigensolver by [`hessian_extremes`].
/// Dense solves stay available up to the Hessian size guard; above this
/// cutoff the exact structured route is used because a dense solve costs
/// O((dm)³).
pub const DENSE_EIGEN_LIMIT: usize = 256;

/// Dense up to [`DENSE_EIGEN_LIMIT`], structured above.
pub fn hessian_extremes(net: &Network, w: &Weights, z: &Example) -> Result<Extremes> {
    if net.d() * net.m() <= DENSE_EIGEN_LIMIT.min(DENSE_HESSIAN_LIMIT) {
        dense_extremes(net, w, z)
    } else {
        Ok(structured_extremes(net, w, z))
    }
}

/// Matrix-free Lanczos with full reorthogonalization on Hessian-vector
/// products. Returns the extreme Ritz values after `steps` iterations
/// (or fewer on an invariant subspace).
pub fn lanczos_extremes(
    net: &Network,
    w: &Weights,
    z: &Example,
    steps: usize,
    start: &Weights,
) -> Result<Extremes> {
    let dim = net.d() * net.m();
    let steps = steps.min(dim).max(1);
    let mut q = start.clone();
    let norm = q.norm();
    if norm == 0.0 {
        return Err(LabError::domain("Lanczos start vector is zero"));
    }
    q.scale(1.0 / norm);
    let mut basis: Vec<Weights> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    for j in 0..steps {
        let mut v = net.hvp(w, z, &q);
        let a = v.dot(&q);
        alpha.push(a);
        v.axpy(-a, &q);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            v.axpy(-b, prev);
        }
        basis.push(q.clone());
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for u in &basis {
                let p = v.dot(u);
                v.axpy(-p, u);
            }
        }
        let b = v.norm();
        if j + 1 == steps || b <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        beta.push(b);
        v.scale(1.0 / b);
        q = v;
    }
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Extremes {
        lambda_min,
        lambda_max,
        method: EigenMethod::Lanczos,
    })
}

/// λ_min by power iteration on ρI − ∇²ℓ (positive semidefinite since
/// λ_max ≤ ρ). Errors when the Rayleigh quotient has not settled to
/// `tol` within `iterations`.
pub fn power_iteration_min(
    net: &Network,
    w: &Weights,
    z: &Example,
    shift: f64,
    iterations: usize,
    tol: f64,
    start: &Weights,
) -> Result<f64> {
    let mut q = start.clone();
    let norm = q.norm();
    if norm == 0.0 {
        return Err(LabError::domain("power iteration start vector is zero"));
    }
    q.scale(1.0 / norm);
    let mut prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for _ in 0..iterations {
        let hq = net.hvp(w, z, &q);
        let mut v = q.clone();
        v.scale(shift);
        v.axpy(-1.0, &hq);
        let mu = v.dot(&q);
        let mut r = v.clone();
        r.axpy(-mu, &q);
        residual = r.norm();
        let vn = v.norm();
        if vn == 0.0 {
            return Ok(shift);
        }
        v.scale(1.0 / vn);
        q = v;
        if (mu - prev).abs() <= tol && residual <= tol.sqrt() {
            return Ok(shift - mu);
        }
        prev = mu;
    }
    Err(LabError::Numeric {
        residual,
        message: format!("power iteration did not converge in {iterations} iterations"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_against_dense() {
        let c = [0.3, -0.2, 0.3, 1.1, -0.2];
        let a = [0.5, 0.1, -0.4, 0.0, 0.7];
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&c));
        for i in 0..5 {
            for j in 0..5 {
                m[(i, j)] += a[i] * a[j];
            }
        }
        let eig = SymmetricEigen::new(m);
        let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (slo, shi) = rank_one_extremes(&c, &a);
        assert!((lo - slo).abs() < 1e-12, "{lo} vs {slo}");
        assert!((hi - shi).abs() < 1e-12, "{hi} vs {shi}");
    }

    #[test]
    fn rank_one_all_zero_weights() {
        assert_eq!(rank_one_extremes(&[2.0, -1.0], &[0.0, 0.0]), (-1.0, 2.0));
        assert_eq!(rank_one_extremes(&[0.0, 0.0], &[1.0, 0.0]), (0.0, 1.0));
    }
}
