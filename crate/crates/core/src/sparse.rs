use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("entry index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("entry indices must be strictly increasing (saw {prev} then {next})")]
    Unordered { prev: usize, next: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// Sparse real vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<usize>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    /// Builds from `(index, value)` pairs; zero values are dropped.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self, SparseError> {
        let mut v = SparseVector::zeros(dim);
        for (index, value) in pairs {
            if index >= dim {
                return Err(SparseError::IndexOutOfRange { index, dim });
            }
            if !value.is_finite() {
                return Err(SparseError::NonFinite(index));
            }
            if let Some(&prev) = v.indices.last() {
                if index <= prev {
                    return Err(SparseError::Unordered { prev, next: index });
                }
            }
            if value != 0.0 {
                v.indices.push(index);
                v.values.push(value);
            }
        }
        Ok(v)
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector::from_pairs(values.len(), values.iter().copied().enumerate())
            .expect("dense input is ordered and in range")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Value at `index`, zero when absent.
    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    /// Dot product against a dense vector, summed in index order.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector::from_pairs(self.dim, self.iter().map(|(i, v)| (i, v * factor)))
            .expect("scaling preserves order")
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}
