//! Rayleigh-Ritz procedure and the LOBPCG block iteration for computing all
//! eigenpairs on one side of zero, with warm starts and random subspace
//! expansion.
//!
//! The block iteration works on the trial subspace `span(X, R, dX)` with
//! `R = A X - X Lambda`; using the shifted residual instead of `A X` improves
//! the conditioning of the basis. When every Ritz value in the block turns
//! positive the block is widened with random directions, since the requested
//! side may hold more eigenpairs than the block can represent.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{
    full_symmetric_eig_dense, orthonormalize_span, LinalgError, SymMatrix,
};

/// Approximate eigenpairs produced by the Rayleigh-Ritz procedure.
///
/// Values are ascending; `residual_norms[i]` is the 2-norm of the i-th column
/// of `A V - V Lambda`.
#[derive(Debug, Clone)]
pub struct RitzSet {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub residual_norms: Vec<f64>,
}

impl RitzSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    /// Sum of squared residual norms, `|R|_F^2`.
    pub fn residual_fro_sq(&self) -> f64 {
        self.residual_norms.iter().map(|r| r * r).sum()
    }

    fn restrict(&self, keep: &[usize]) -> RitzSet {
        let n = self.vectors.nrows();
        let values = DVector::from_fn(keep.len(), |i, _| self.values[keep[i]]);
        let mut vectors = DMatrix::zeros(n, keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            vectors.set_column(dst, &self.vectors.column(src));
        }
        let residual_norms = keep.iter().map(|&i| self.residual_norms[i]).collect();
        RitzSet {
            values,
            vectors,
            residual_norms,
        }
    }
}

/// Which side of zero the eigensolver is asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

/// Resumable LOBPCG state: the current Ritz block and the previous-step
/// difference block (empty on a cold start or right after an expansion).
#[derive(Debug, Clone)]
pub struct LobpcgState {
    pub x: DMatrix<f64>,
    pub delta_x: DMatrix<f64>,
    pub side: Side,
}

impl LobpcgState {
    /// Cold block of `m` random directions.
    pub fn cold(n: usize, m: usize, side: Side, rng: &mut ChaCha8Rng) -> Self {
        let m = m.clamp(1, n);
        let x = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        Self {
            x,
            delta_x: DMatrix::zeros(n, 0),
            side,
        }
    }

    pub fn from_block(x: DMatrix<f64>, side: Side) -> Self {
        let n = x.nrows();
        Self {
            x,
            delta_x: DMatrix::zeros(n, 0),
            side,
        }
    }

    pub fn width(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LobpcgStatus {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone, Copy)]
pub struct LobpcgReport {
    pub status: LobpcgStatus,
    pub inner_iterations: usize,
    /// Width of the block when the call returned (pairs computed).
    pub block_width: usize,
}

/// Rayleigh-Ritz procedure on the trial subspace spanned by the columns of `s`.
pub fn rayleigh_ritz(a: &SymMatrix, s: &DMatrix<f64>) -> Result<RitzSet, LinalgError> {
    let n = a.dim();
    if s.nrows() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "trial subspace has {} rows for a {n}-dim matrix",
            s.nrows()
        )));
    }
    if s.ncols() == 0 || s.ncols() > n {
        return Err(LinalgError::DimensionMismatch(format!(
            "trial subspace must have 1..={n} columns, got {}",
            s.ncols()
        )));
    }
    rayleigh_ritz_dense(&a.to_dense(), s)
}

fn rayleigh_ritz_dense(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<RitzSet, LinalgError> {
    let q = orthonormalize_span(s)?;
    let aq = a * &q;
    let h = q.tr_mul(&aq);
    let pairs = full_symmetric_eig_dense(&h)?;
    let vectors = &q * &pairs.vectors;
    let avectors = &aq * &pairs.vectors;
    let p = pairs.values.len();
    let residual_norms = (0..p)
        .map(|j| (avectors.column(j) - vectors.column(j) * pairs.values[j]).norm())
        .collect();
    Ok(RitzSet {
        values: pairs.values,
        vectors,
        residual_norms,
    })
}

/// Per-pair residual norms `|A v_i - lambda_i v_i|_2`, recomputed directly.
pub fn residual_norms(a: &SymMatrix, ritz: &RitzSet) -> Vec<f64> {
    let dense = a.to_dense();
    let av = &dense * &ritz.vectors;
    (0..ritz.len())
        .map(|j| (av.column(j) - ritz.vectors.column(j) * ritz.values[j]).norm())
        .collect()
}

/// Diagnostic estimate of the largest eigenvalue of the deflated operator
/// `(I - V V^T) A (I - V V^T)`, clamped at zero.
///
/// Shifted power iteration with a fixed internal seed; used only for logging,
/// never for control flow.
pub fn estimate_perp_term(a: &SymMatrix, ritz: &RitzSet, iters: usize) -> f64 {
    assert!(iters >= 1, "power iteration needs at least one step");
    let n = a.dim();
    let dense = a.to_dense();
    let v_block = &ritz.vectors;
    let deflate = |v: &DVector<f64>| -> DVector<f64> {
        if v_block.ncols() == 0 {
            v.clone()
        } else {
            v - v_block * (v_block.tr_mul(v))
        }
    };
    let apply = |v: &DVector<f64>| -> DVector<f64> { deflate(&(&dense * deflate(v))) };

    let shift = a.fro_norm() + 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b9);
    let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0f64..1.0));
    let nv = v.norm();
    if nv == 0.0 {
        return 0.0;
    }
    v /= nv;
    for _ in 0..iters {
        let w = apply(&v) + &v * shift;
        let wn = w.norm();
        if wn <= 1e-300 {
            return 0.0;
        }
        v = w / wn;
    }
    let estimate = v.dot(&apply(&v));
    estimate.max(0.0)
}

use rand::SeedableRng;

/// LOBPCG for all eigenpairs on one side of zero.
///
/// Returns the Ritz pairs restricted to the requested side, the fully
/// populated state block for warm starting, and a report. On
/// `NotConverged` the caller is expected to fall back to an exact
/// decomposition.
pub fn lobpcg(
    a: &SymMatrix,
    state: LobpcgState,
    tol: f64,
    max_inner: usize,
    expand_by: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(RitzSet, LobpcgState, LobpcgReport), LinalgError> {
    assert!(tol > 0.0, "residual tolerance must be positive");
    assert!(expand_by >= 1, "expansion size must be at least 1");
    let n = a.dim();
    if state.x.nrows() != n || state.x.ncols() == 0 {
        return Err(LinalgError::DimensionMismatch(format!(
            "state block is {}x{} for a {n}-dim matrix",
            state.x.nrows(),
            state.x.ncols()
        )));
    }
    let side = state.side;
    let dense = a.to_dense();
    let working = match side {
        Side::Positive => dense,
        Side::Negative => -dense,
    };
    let mut x0 = state.x;
    if x0.ncols() > n {
        x0 = x0.columns(0, n).into_owned();
    }
    let (ritz, x, delta_x, report) = lobpcg_positive(
        &working,
        x0,
        state.delta_x,
        tol,
        max_inner,
        expand_by,
        rng,
    )?;
    let ritz = match side {
        Side::Positive => ritz,
        Side::Negative => negate_ritz(ritz),
    };
    Ok((ritz, LobpcgState { x, delta_x, side }, report))
}

/// Ritz pairs of `-A` ascending become pairs of `A` descending after negation;
/// reverse to restore ascending order.
fn negate_ritz(ritz: RitzSet) -> RitzSet {
    let p = ritz.len();
    let order: Vec<usize> = (0..p).rev().collect();
    let mut out = ritz.restrict(&order);
    out.values.iter_mut().for_each(|v| *v = -*v);
    out
}

fn lobpcg_positive(
    b: &DMatrix<f64>,
    x0: DMatrix<f64>,
    dx0: DMatrix<f64>,
    tol: f64,
    max_inner: usize,
    expand_by: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(RitzSet, DMatrix<f64>, DMatrix<f64>, LobpcgReport), LinalgError> {
    let n = b.nrows();
    let b_scale = 1.0 + b.norm();

    // Re-orthonormalize the resumed block only when the invariant is violated.
    let mut x = x0;
    let m0 = x.ncols();
    let ortho_err = (x.tr_mul(&x) - DMatrix::identity(m0, m0)).norm();
    if ortho_err > 1e-6 {
        x = orthonormalize_span(&x)?;
    }

    // Establish Rayleigh-Ritz consistency on span(X^0).
    let initial = rayleigh_ritz_dense(b, &x)?;
    let mut lam = initial.values;
    x = initial.vectors;
    let mut dx = if dx0.nrows() == n && dx0.ncols() == x.ncols() {
        dx0
    } else {
        DMatrix::zeros(n, 0)
    };

    let mut inner = 0usize;
    // After a widening the new directions must pass through Rayleigh-Ritz
    // before convergence may be declared.
    let mut expansion_pending = false;

    loop {
        let m = x.ncols();
        let ax = b * &x;
        let mut residual = DMatrix::zeros(n, m);
        let mut resid_norm = vec![0.0f64; m];
        for j in 0..m {
            let col = ax.column(j) - x.column(j) * lam[j];
            resid_norm[j] = col.norm();
            residual.set_column(j, &col);
        }
        let positive: Vec<usize> = (0..m).filter(|&j| lam[j] > 0.0).collect();
        let saturated = positive.len() == m && m < n;

        if !saturated && !expansion_pending {
            let positive_ok = positive.iter().all(|&j| resid_norm[j] <= tol);
            // The boundary pair is the largest non-positive Ritz value. Requiring
            // it to be resolved prevents stopping while a positive eigenvalue is
            // still emerging from the bulk, and covers the case of zero positive
            // pairs (the top pair must then certify a nonpositive spectrum edge).
            let boundary_ok = match (0..m).rev().find(|&j| lam[j] <= 0.0) {
                Some(j) => resid_norm[j] <= tol,
                None => true, // block spans the whole space
            };
            if positive_ok && boundary_ok {
                let ritz = restricted_set(&x, &lam, &resid_norm, &positive);
                let report = LobpcgReport {
                    status: LobpcgStatus::Converged,
                    inner_iterations: inner,
                    block_width: m,
                };
                return Ok((ritz, x, dx, report));
            }
        }

        if saturated {
            let add = expand_by.min(n - m);
            x = widen_with_random(&x, add, rng)?;
            let mut lam_ext = DVector::zeros(m + add);
            lam_ext.rows_mut(0, m).copy_from(&lam);
            for j in m..m + add {
                let col = x.column(j).into_owned();
                lam_ext[j] = col.dot(&(b * &col));
            }
            lam = lam_ext;
            dx = DMatrix::zeros(n, 0);
            expansion_pending = true;
            continue;
        }

        if inner >= max_inner {
            let ritz = restricted_set(&x, &lam, &resid_norm, &positive);
            let report = LobpcgReport {
                status: LobpcgStatus::NotConverged,
                inner_iterations: inner,
                block_width: m,
            };
            return Ok((ritz, x, dx, report));
        }
        inner += 1;

        // Trial subspace [X, R, dX]; residual and difference columns are
        // rescaled to unit length and dropped when negligible.
        let r_cols = select_unit_columns(&residual, 1e-13 * b_scale);
        let d_cols = select_unit_columns(&dx, 1e-13);
        let total = m + r_cols.ncols() + d_cols.ncols();
        let mut trial = DMatrix::zeros(n, total);
        trial.view_mut((0, 0), (n, m)).copy_from(&x);
        trial
            .view_mut((0, m), (n, r_cols.ncols()))
            .copy_from(&r_cols);
        trial
            .view_mut((0, m + r_cols.ncols()), (n, d_cols.ncols()))
            .copy_from(&d_cols);

        let rs = rayleigh_ritz_dense(b, &trial)?;
        let p = rs.len();
        let keep = m.min(p);
        let new_x = rs.vectors.columns(p - keep, keep).into_owned();
        let new_lam = rs.values.rows(p - keep, keep).into_owned();
        dx = if new_x.ncols() == x.ncols() {
            &new_x - &x
        } else {
            DMatrix::zeros(n, 0)
        };
        x = new_x;
        lam = new_lam;
        expansion_pending = false;
    }
}

fn restricted_set(
    x: &DMatrix<f64>,
    lam: &DVector<f64>,
    resid: &[f64],
    keep: &[usize],
) -> RitzSet {
    let n = x.nrows();
    let values = DVector::from_fn(keep.len(), |i, _| lam[keep[i]]);
    let mut vectors = DMatrix::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        vectors.set_column(dst, &x.column(src));
    }
    RitzSet {
        values,
        vectors,
        residual_norms: keep.iter().map(|&i| resid[i]).collect(),
    }
}

/// Keeps columns with norm above `floor`, rescaled to unit length.
fn select_unit_columns(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let cols: Vec<DVector<f64>> = (0..m.ncols())
        .filter_map(|j| {
            let col = m.column(j).into_owned();
            let norm = col.norm();
            (norm > floor).then(|| col / norm)
        })
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Appends `add` random columns orthogonal to the block, unit-normalized.
fn widen_with_random(
    x: &DMatrix<f64>,
    add: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>, LinalgError> {
    let n = x.nrows();
    let m = x.ncols();
    let mut out = DMatrix::zeros(n, m + add);
    out.view_mut((0, 0), (n, m)).copy_from(x);
    for j in 0..add {
        let mut accepted = false;
        for _ in 0..32 {
            let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0f64..1.0));
            let block = out.columns(0, m + j);
            v -= &block * (block.tr_mul(&v));
            let norm = v.norm();
            if norm > 1e-8 {
                out.set_column(m + j, &(v / norm));
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(LinalgError::SubspaceDegenerate);
        }
    }
    Ok(out)
}
