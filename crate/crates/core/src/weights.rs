use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// A d×m weight matrix. Column k (the hidden unit's incoming weights w_k)
/// is stored contiguously, so the vectorized index of entry (j, k) is
/// `k * d + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    d: usize,
    m: usize,
    data: Vec<f64>,
}

impl Weights {
    pub fn zeros(d: usize, m: usize) -> Self {
        Weights {
            d,
            m,
            data: vec![0.0; d * m],
        }
    }

    /// Builds from a column-contiguous buffer (`data[k * d + j]`).
    pub fn from_columns(d: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != d * m {
            return Err(LabError::shape(format!(
                "buffer of length {} for a {d}x{m} matrix",
                data.len()
            )));
        }
        Ok(Weights { d, m, data })
    }

    pub fn from_row_major(d: usize, m: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != d * m {
            return Err(LabError::shape(format!(
                "buffer of length {} for a {d}x{m} matrix",
                rows.len()
            )));
        }
        let mut w = Weights::zeros(d, m);
        for j in 0..d {
            for k in 0..m {
                w.data[k * d + j] = rows[j * m + k];
            }
        }
        Ok(w)
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d * self.m];
        for j in 0..self.d {
            for k in 0..self.m {
                out[j * self.m + k] = self.data[k * self.d + j];
            }
        }
        out
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d, self.m)
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[k * self.d + j]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        self.data[k * self.d + j] = v;
    }

    #[inline]
    pub fn column(&self, k: usize) -> &[f64] {
        &self.data[k * self.d..(k + 1) * self.d]
    }

    #[inline]
    pub fn column_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn columns(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.d.max(1))
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Weights) -> bool {
        self.d == other.d && self.m == other.m
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Frobenius norm, the ‖·‖₂ used for weight matrices throughout.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Frobenius inner product. Panics on shape mismatch.
    pub fn dot(&self, other: &Weights) -> f64 {
        assert!(self.same_shape(other), "dot of mismatched weights");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn distance_sq(&self, other: &Weights) -> f64 {
        assert!(self.same_shape(other), "distance of mismatched weights");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn distance(&self, other: &Weights) -> f64 {
        self.distance_sq(other).sqrt()
    }

    /// self += alpha * x
    pub fn axpy(&mut self, alpha: f64, x: &Weights) {
        assert!(self.same_shape(x), "axpy of mismatched weights");
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// self - other
    pub fn sub(&self, other: &Weights) -> Weights {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`.
    pub fn lerp(&self, other: &Weights, alpha: f64) -> Weights {
        assert!(self.same_shape(other), "lerp of mismatched weights");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        Weights {
            d: self.d,
            m: self.m,
            data,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_layout() {
        // [[1, 2, 3], [4, 5, 6]] with d = 2, m = 3
        let w = Weights::from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(w.column(1), &[2.0, 5.0]);
        assert_eq!(w.get(1, 2), 6.0);
        assert_eq!(w.to_row_major(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn frobenius() {
        let w = Weights::from_row_major(1, 2, &[3.0, 4.0]).unwrap();
        assert_eq!(w.norm(), 5.0);
        assert_eq!(w.distance(&Weights::zeros(1, 2)), 5.0);
    }

    #[test]
    fn shape_guard() {
        assert!(matches!(
            Weights::from_columns(2, 2, vec![0.0; 3]),
            Err(LabError::Shape(_))
        ));
    }
}
