use nalgebra::{DMatrix, DVector};

use super::LinalgError;

/// Length of the packed upper triangle of an `n x n` symmetric matrix.
#[inline]
pub fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Side length `n` such that `tri_len(n) == len`, if one exists.
pub fn tri_dim(len: usize) -> Option<usize> {
    if len == 0 {
        return None;
    }
    let n = (((8.0 * len as f64 + 1.0).sqrt() - 1.0) / 2.0).round() as usize;
    (n >= 1 && tri_len(n) == len).then_some(n)
}

/// Packed index of entry `(i, j)` with `i <= j` (upper triangle, column-major).
#[inline]
pub fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

/// A real symmetric matrix stored as its upper triangle (column-major packed).
///
/// Symmetry holds by construction: only one triangle exists, so the logical
/// matrix always equals its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "symmetric matrix dimension must be at least 1");
        Self {
            n,
            data: vec![0.0; tri_len(n)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from a dense matrix, symmetrizing as `(M + M^T)/2`.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        let n = m.nrows();
        let mut out = Self::zeros(n);
        for j in 0..n {
            for i in 0..=j {
                out.data[tri_index(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.data[tri_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.data[tri_index(i, j)] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Frobenius norm (off-diagonal entries counted twice).
    pub fn fro_norm(&self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.n {
            for i in 0..=j {
                let v = self.data[tri_index(i, j)];
                acc += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        acc.sqrt()
    }

    pub fn packed(&self) -> &[f64] {
        &self.data
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Isometric vectorization: off-diagonal entries are scaled by sqrt(2) so that
/// `svec(A) . svec(B) = <A, B>_F` and `|svec(A)|_2 = |A|_F`.
pub fn svec(m: &SymMatrix) -> DVector<f64> {
    let n = m.dim();
    let mut out = DVector::zeros(tri_len(n));
    for j in 0..n {
        for i in 0..=j {
            let v = m.get(i, j);
            out[tri_index(i, j)] = if i == j { v } else { SQRT_2 * v };
        }
    }
    out
}

/// Inverse of [`svec`]. The input length must be a triangular number.
pub fn smat(v: &[f64]) -> Result<SymMatrix, LinalgError> {
    let n = tri_dim(v.len()).ok_or(LinalgError::NotTriangular(v.len()))?;
    let mut out = SymMatrix::zeros(n);
    for j in 0..n {
        for i in 0..=j {
            let x = v[tri_index(i, j)];
            out.set(i, j, if i == j { x } else { x / SQRT_2 });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn svec_identity_matrix() {
        let v = svec(&SymMatrix::identity(2));
        assert_eq!(v.as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn smat_rejects_non_triangular_length() {
        assert!(matches!(smat(&[1.0, 2.0]), Err(LinalgError::NotTriangular(2))));
        assert!(smat(&[]).is_err());
    }

    #[test]
    fn svec_smat_round_trip() {
        let v = [0.3, -1.2, 2.0, 0.07, -4.5, 1.0];
        let round = svec(&smat(&v).unwrap());
        for (a, b) in v.iter().zip(round.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn svec_preserves_trace_inner_product() {
        // <svec(A), svec(B)> equals trace(A B), computed directly as the oracle.
        let a = SymMatrix::from_dense(&DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.4, -0.2, 0.4, 2.0, 0.9, -0.2, 0.9, -1.5],
        ));
        let b = SymMatrix::from_dense(&DMatrix::from_row_slice(
            3,
            3,
            &[0.5, -1.0, 0.3, -1.0, 0.0, 2.2, 0.3, 2.2, 4.0],
        ));
        let trace_ab = (a.to_dense() * b.to_dense()).trace();
        let dot = svec(&a).dot(&svec(&b));
        assert!((trace_ab - dot).abs() <= 1e-12);
    }

    proptest! {
        #[test]
        fn svec_is_an_isometry(vals in proptest::collection::vec(-10.0f64..10.0, 10)) {
            let m = smat(&vals).unwrap();
            let norm_vec = svec(&m).norm();
            let norm_fro = m.fro_norm();
            prop_assert!((norm_vec - norm_fro).abs() <= 1e-12 * (1.0 + norm_fro));
        }

        #[test]
        fn round_trip_is_identity(vals in proptest::collection::vec(-100.0f64..100.0, 6)) {
            let round = svec(&smat(&vals).unwrap());
            for (a, b) in vals.iter().zip(round.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
