use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row norms for matrices that claim to be normalized.
pub const NORM_TOLERANCE: f64 = 1e-3;

/// Row-major matrix of `f32` embeddings, one vector per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if rows.checked_mul(dim) != Some(data.len()) {
            return Err(Error::Shape { rows, dim, len: data.len() });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        Self { rows: 0, dim, data: Vec::new() }
    }

    /// Builds a matrix from row slices; every row must have length `dim`.
    pub fn from_rows<'a, I>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f32]>,
    {
        let mut data = Vec::new();
        let mut count = 0;
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimMismatch { expected: dim, found: row.len() });
            }
            data.extend_from_slice(row);
            count += 1;
        }
        Ok(Self { rows: count, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Panics when `i >= rows`.
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // chunks_exact on a zero dim would panic
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: indices.len(), dim: self.dim, data }
    }

    /// Fails with [`Error::NormViolation`] on the first row whose L2 norm
    /// is off by more than [`NORM_TOLERANCE`].
    pub fn check_unit_norm(&self, name: &'static str) -> Result<()> {
        for (row, v) in self.iter_rows().enumerate() {
            let norm = l2_norm(v);
            if (norm - 1.0).abs() > NORM_TOLERANCE || norm.is_nan() {
                return Err(Error::NormViolation { matrix: name, row, norm });
            }
        }
        Ok(())
    }
}

pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum()
}

pub fn l2_norm(v: &[f32]) -> f64 {
    libm::sqrt(dot(v, v))
}

/// Scales `v` to unit length in place; zero vectors are left untouched.
pub fn normalize_in_place(v: &mut [f64]) {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}
