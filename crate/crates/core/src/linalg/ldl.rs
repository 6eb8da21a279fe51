use nalgebra::{DMatrix, DVector};

use super::LinalgError;

/// LDL^T factorization of a symmetric quasidefinite matrix.
///
/// Quasidefinite matrices factor with nonzero diagonal pivots under any
/// symmetric permutation, so the natural order is used and the permutation is
/// kept as identity. The diagonal carries the fixed inertia of the matrix.
#[derive(Debug, Clone)]
pub struct QuasidefFactor {
    perm: Vec<usize>,
    l: DMatrix<f64>,
    d: DVector<f64>,
    pos: usize,
    neg: usize,
}

impl QuasidefFactor {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Numbers of positive and negative pivots.
    pub fn inertia(&self) -> (usize, usize) {
        (self.pos, self.neg)
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

/// Factorizes a symmetric quasidefinite matrix as `P^T L D L^T P`.
///
/// A pivot within the quasidefinite tolerance of zero signals a bad
/// assembly (for the KKT matrix: nonpositive sigma or rho).
pub fn ldl_factorize(q: &DMatrix<f64>) -> Result<QuasidefFactor, LinalgError> {
    let n = q.nrows();
    if n != q.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "ldl needs a square matrix, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let scale = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let tol = 1e-14 * scale.max(1.0);

    let mut l = DMatrix::<f64>::identity(n, n);
    let mut d = DVector::<f64>::zeros(n);
    for j in 0..n {
        let mut dj = q[(j, j)];
        for s in 0..j {
            dj -= l[(j, s)] * l[(j, s)] * d[s];
        }
        if dj.abs() <= tol || !dj.is_finite() {
            return Err(LinalgError::ZeroPivot(j));
        }
        d[j] = dj;
        for i in (j + 1)..n {
            let mut v = q[(i, j)];
            for s in 0..j {
                v -= l[(i, s)] * l[(j, s)] * d[s];
            }
            l[(i, j)] = v / dj;
        }
    }
    let pos = d.iter().filter(|&&v| v > 0.0).count();
    let neg = n - pos;
    Ok(QuasidefFactor {
        perm: (0..n).collect(),
        l,
        d,
        pos,
        neg,
    })
}

/// Solves `Q x = b` given the factorization of `Q`.
pub fn ldl_solve(f: &QuasidefFactor, b: &DVector<f64>) -> DVector<f64> {
    let n = f.dim();
    assert_eq!(b.len(), n, "rhs length mismatch");
    let mut x = b.clone();
    // Forward substitution with unit lower L.
    for j in 0..n {
        let xj = x[j];
        for i in (j + 1)..n {
            x[i] -= f.l[(i, j)] * xj;
        }
    }
    for i in 0..n {
        x[i] /= f.d[i];
    }
    // Backward substitution with L^T.
    for j in (0..n).rev() {
        let mut v = x[j];
        for i in (j + 1)..n {
            v -= f.l[(i, j)] * x[i];
        }
        x[j] = v;
    }
    x
}
