use nalgebra::{DMatrix, DVector};

use super::{LinalgError, SymMatrix};

/// Eigenpairs of a symmetric matrix: values ascending, vectors column-orthonormal.
#[derive(Debug, Clone)]
pub struct EigPairs {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }
}

/// Full eigendecomposition of a symmetric matrix, the "exact" projection path.
///
/// Values are sorted ascending and the vectors are permuted to match.
pub fn full_symmetric_eig(a: &SymMatrix) -> Result<EigPairs, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let se = nalgebra::SymmetricEigen::new(a.to_dense());
    Ok(sorted_pairs(se.eigenvalues, se.eigenvectors))
}

/// Dense variant used internally by the eigensolver, where the matrix has
/// already been symmetrized.
pub(crate) fn full_symmetric_eig_dense(a: &DMatrix<f64>) -> Result<EigPairs, LinalgError> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let half = 0.5 * (a + a.transpose());
    let se = nalgebra::SymmetricEigen::new(half);
    Ok(sorted_pairs(se.eigenvalues, se.eigenvectors))
}

fn sorted_pairs(values: DVector<f64>, vectors: DMatrix<f64>) -> EigPairs {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let sorted_values = DVector::from_fn(n, |i, _| values[order[i]]);
    let mut sorted_vectors = DMatrix::zeros(vectors.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_column(dst, &vectors.column(src));
    }
    EigPairs {
        values: sorted_values,
        vectors: sorted_vectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym::SymMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reconstruction_error(a: &SymMatrix, pairs: &EigPairs) -> f64 {
        let dense = a.to_dense();
        let lam = DMatrix::from_diagonal(&pairs.values);
        (&pairs.vectors * lam * pairs.vectors.transpose() - dense).norm()
    }

    #[test]
    fn diagonal_matrix_sorted_ascending() {
        let a = SymMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let pairs = full_symmetric_eig(&a).unwrap();
        assert_eq!(pairs.values.as_slice(), &[1.0, 2.0, 3.0]);
        // Each eigenvector is a signed standard basis vector.
        for (k, expect) in [(0usize, 1usize), (1, 2), (2, 0)] {
            let col = pairs.vectors.column(k);
            assert!((col[expect].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_postconditions() {
        let a = SymMatrix::zeros(4);
        let pairs = full_symmetric_eig(&a).unwrap();
        assert!(pairs.values.iter().all(|v| v.abs() < 1e-14));
        let vtv = pairs.vectors.transpose() * &pairs.vectors;
        assert!((vtv - DMatrix::identity(4, 4)).norm() < 1e-8);
    }

    #[test]
    fn random_matrix_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let raw = DMatrix::from_fn(10, 10, |_, _| rng.gen_range(-2.0..2.0));
        let a = SymMatrix::from_dense(&raw);
        let pairs = full_symmetric_eig(&a).unwrap();
        assert!(reconstruction_error(&a, &pairs) <= 1e-8 * (1.0 + a.fro_norm()));
        for w in pairs.values.as_slice().windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut a = SymMatrix::zeros(2);
        a.set(0, 1, f64::NAN);
        assert!(matches!(full_symmetric_eig(&a), Err(LinalgError::NonFinite)));
    }
}
