use nalgebra::DMatrix;

use super::LinalgError;

/// Pivot threshold for declaring the Gram-matrix Cholesky failed, relative to
/// the largest initial diagonal entry.
const PIVOT_REL_TOL: f64 = 1e-12;

/// Orthonormalizes the columns of `s` via Cholesky of the Gram matrix.
///
/// Fast but fails on rank-deficient input: a pivot at or below
/// `1e-12 * max(diag)` raises [`LinalgError::RankDeficient`], and the caller
/// is expected to fall back to Householder QR.
pub fn cholesky_qr(s: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let (n, p) = s.shape();
    if p > n {
        return Err(LinalgError::DimensionMismatch(format!(
            "cholesky-qr needs p <= n, got {n}x{p}"
        )));
    }
    if p == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let gram = s.tr_mul(s);
    let l = gram_cholesky(&gram)?;
    // S = Q L^T, so Q^T = L^{-1} S^T.
    let qt = l
        .solve_lower_triangular(&s.transpose())
        .ok_or(LinalgError::RankDeficient)?;
    Ok(qt.transpose())
}

/// Lower Cholesky factor of a symmetric positive definite matrix, with the
/// relative pivot guard that signals rank deficiency.
fn gram_cholesky(g: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let p = g.nrows();
    let max_diag = (0..p).map(|i| g[(i, i)]).fold(0.0f64, f64::max);
    if !max_diag.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let threshold = PIVOT_REL_TOL * max_diag;
    let mut l = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut d = g[(j, j)];
        for s in 0..j {
            d -= l[(j, s)] * l[(j, s)];
        }
        if d <= threshold || !d.is_finite() {
            return Err(LinalgError::RankDeficient);
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..p {
            let mut v = g[(i, j)];
            for s in 0..j {
                v -= l[(i, s)] * l[(j, s)];
            }
            l[(i, j)] = v / dj;
        }
    }
    Ok(l)
}

/// Orthonormal basis for the column span of `s`.
///
/// Tries Cholesky-QR first and falls back to Householder QR with column
/// pivoting on rank deficiency, dropping dependent columns. Errors only when
/// nothing of the span survives.
pub fn orthonormalize_span(s: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    // Wider than tall can never have a positive definite Gram matrix; go
    // straight to the pivoted fallback.
    let attempt = if s.ncols() > s.nrows() {
        Err(LinalgError::RankDeficient)
    } else {
        cholesky_qr(s)
    };
    match attempt {
        Ok(q) => Ok(q),
        Err(LinalgError::RankDeficient) => {
            let qr = s.clone().col_piv_qr();
            let r = qr.r();
            let q = qr.q();
            let p = r.nrows().min(r.ncols());
            let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
            if scale == 0.0 || !scale.is_finite() {
                return Err(LinalgError::SubspaceDegenerate);
            }
            // Pivoted R has a non-increasing diagonal in magnitude.
            let rank = (0..p)
                .take_while(|&i| r[(i, i)].abs() > 1e-12 * scale)
                .count();
            if rank == 0 {
                return Err(LinalgError::SubspaceDegenerate);
            }
            Ok(q.columns(0, rank).into_owned())
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
        let p = q.ncols();
        (q.tr_mul(q) - DMatrix::identity(p, p)).norm()
    }

    #[test]
    fn orthonormal_input_unchanged_up_to_sign() {
        let s = DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
        ]);
        let q = cholesky_qr(&s).unwrap();
        for j in 0..2 {
            let dot = q.column(j).dot(&s.column(j)).abs();
            assert!((dot - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_column_signals_rank_deficiency() {
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let s = DMatrix::from_columns(&[e1.clone(), e1]);
        assert!(matches!(cholesky_qr(&s), Err(LinalgError::RankDeficient)));
    }

    #[test]
    fn random_tall_matrix_orthonormal_and_spanning() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = DMatrix::from_fn(20, 5, |_, _| rng.gen_range(-1.0..1.0));
        let q = cholesky_qr(&s).unwrap();
        assert!(orthonormality_error(&q) <= 1e-8);
        // Householder QR as the span oracle: each column of S must lie in span(Q).
        let qr = s.clone().qr();
        let q_ref = qr.q();
        for j in 0..5 {
            let col = s.column(j).into_owned();
            let residual = &col - &q * (q.tr_mul(&col));
            assert!(residual.norm() <= 1e-8 * (1.0 + col.norm()));
            let residual_ref = &col - &q_ref * (q_ref.tr_mul(&col));
            assert!(residual_ref.norm() <= 1e-8 * (1.0 + col.norm()));
        }
    }

    #[test]
    fn fallback_reduces_rank_deficient_span() {
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        let sum = &e1 + &e2;
        let s = DMatrix::from_columns(&[e1, e2, sum]);
        let q = orthonormalize_span(&s).unwrap();
        assert_eq!(q.ncols(), 2);
        assert!(orthonormality_error(&q) <= 1e-10);
    }

    #[test]
    fn zero_span_is_degenerate() {
        let s = DMatrix::zeros(4, 2);
        assert!(matches!(
            orthonormalize_span(&s),
            Err(LinalgError::SubspaceDegenerate)
        ));
    }
}
