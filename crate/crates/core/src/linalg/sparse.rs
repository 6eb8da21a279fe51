use nalgebra::{DMatrix, DVector};

use super::LinalgError;

/// Compressed sparse column matrix, just enough for problem data: assembly
/// from triplets, matrix-vector products with the matrix and its transpose,
/// and densification for the direct KKT factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_ind: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_ind: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets).expect("identity triplets are valid")
    }

    /// Builds from (row, col, value) triplets; duplicate positions are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::DimensionMismatch(format!(
                    "triplet ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite);
            }
            sorted.push((c, r, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_ind = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut i = 0;
        while i < sorted.len() {
            let (c, r, mut v) = sorted[i];
            let mut j = i + 1;
            while j < sorted.len() && sorted[j].0 == c && sorted[j].1 == r {
                v += sorted[j].2;
                j += 1;
            }
            row_ind.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
            i = j;
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_ind,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `A x`
    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in A*x");
        let mut out = DVector::zeros(self.nrows);
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for idx in self.col_ptr[c]..self.col_ptr[c + 1] {
                out[self.row_ind[idx]] += self.values[idx] * xc;
            }
        }
        out
    }

    /// `A^T y`
    pub fn mul_vec_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.nrows, "dimension mismatch in A^T*y");
        let mut out = DVector::zeros(self.ncols);
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for idx in self.col_ptr[c]..self.col_ptr[c + 1] {
                acc += self.values[idx] * y[self.row_ind[idx]];
            }
            out[c] = acc;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for c in 0..self.ncols {
            for idx in self.col_ptr[c]..self.col_ptr[c + 1] {
                out[(self.row_ind[idx], c)] += self.values[idx];
            }
        }
        out
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for c in 0..self.ncols {
            for idx in self.col_ptr[c]..self.col_ptr[c + 1] {
                out.push((self.row_ind[idx], c, self.values[idx]));
            }
        }
        out
    }
}
