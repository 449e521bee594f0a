//! Sparse feature vectors.

use crate::error::{Result, WltlsError};

/// A feature vector stored as strictly increasing `(index, value)` pairs.
///
/// Zero values are never stored, so `nnz()` is the number of active features.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from pairs that must already be strictly increasing in index.
    /// Zero-valued pairs are dropped.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        let mut out = SparseVector::new();
        for (index, value) in pairs {
            if let Some(&last) = out.indices.last() {
                if index <= last {
                    return Err(WltlsError::InvalidParameter(format!(
                        "feature indices must be strictly increasing ({} after {})",
                        index, last
                    )));
                }
            }
            out.push_unchecked(index, value);
        }
        Ok(out)
    }

    /// Builds a vector from a dense slice, skipping zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut out = SparseVector::new();
        for (i, &v) in dense.iter().enumerate() {
            out.push_unchecked(i as u32, v);
        }
        out
    }

    fn push_unchecked(&mut self, index: u32, value: f64) {
        if value != 0.0 {
            self.indices.push(index);
            self.values.push(value);
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// One past the largest stored index, or 0 for the empty vector.
    pub fn dim_hint(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    /// Dot product against a dense weight slice. Indices past the end of
    /// `weights` contribute nothing.
    pub fn dot_dense(&self, weights: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, v) in self.iter() {
            if let Some(w) = weights.get(i as usize) {
                acc += w * v;
            }
        }
        acc
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}
