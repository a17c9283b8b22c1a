//! Dense vector helpers and the sparse row type used by the losses.
//!
//! All reductions run in ascending index order; nothing here reorders
//! floating-point sums, which keeps every code path bit-reproducible.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc.sqrt()
}

/// `out += coef * a`
pub fn axpy(coef: f64, a: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), out.len());
    for i in 0..a.len() {
        out[i] += coef * a[i];
    }
}

/// A sparse vector with strictly increasing indices, the storage format for
/// data rows `a_i`. Gradients derived from rows are produced dense.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRow {
    /// Builds a row, validating that indices are strictly increasing and all
    /// below `dim`.
    pub fn new(indices: Vec<u32>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::invalid(format!(
                "sparse row has {} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid(
                    "sparse row indices must be strictly increasing",
                ));
            }
        }
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: last as usize + 1,
                });
            }
        }
        Ok(SparseRow { indices, values })
    }

    /// Dense row helper for tests and small synthetic problems.
    pub fn from_dense(values: &[f64]) -> Self {
        let (indices, vals): (Vec<u32>, Vec<f64>) = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        SparseRow {
            indices,
            values: vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            acc += v * x[i as usize];
        }
        acc
    }

    /// `out += coef * row`
    pub fn add_scaled(&self, coef: f64, out: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] += coef * v;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Rescales stored values in place (per-feature scaling support).
    pub fn scale_values(&mut self, per_index: impl Fn(u32) -> f64) {
        for (i, v) in self.indices.iter().zip(self.values.iter_mut()) {
            *v *= per_index(*i);
        }
    }
}
