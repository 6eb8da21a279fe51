//! Exact and approximate projection onto the positive semidefinite cone.
//!
//! The approximate path runs LOBPCG on whichever side of the spectrum was
//! estimated smaller at the previous iteration, and reports the projection
//! error bound `sqrt(2 |R|_F^2)` derived from the Ritz residuals. The
//! orthogonal-complement term of the bound is ignored by default; it is
//! available separately as a diagnostic through
//! [`crate::eigsolver::estimate_perp_term`].

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::eigsolver::{lobpcg, LobpcgState, LobpcgStatus, RitzSet, Side};
use crate::linalg::{full_symmetric_eig, EigPairs, LinalgError, SymMatrix};

/// Inner iteration cap for one projection's LOBPCG call; on a miss the
/// projection falls back to the exact decomposition.
pub const LOBPCG_MAX_INNER: usize = 50;

/// How a single cone block is projected at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ProjectionMode {
    ExactFull,
    ApproxPositive,
    ApproxNegative,
}

/// Per-cone persistent state: previous sign counts, the selected mode, and the
/// eigensolver warm start.
#[derive(Debug, Clone)]
pub struct ProjectionContext {
    n: usize,
    cold: bool,
    pub last_pos_count: usize,
    pub last_neg_count: usize,
    pub mode: ProjectionMode,
    pub warm: Option<LobpcgState>,
    /// Per-iteration error-bound values, in call order.
    pub error_budget_log: Vec<f64>,
    /// Times the approximate path gave up and fell back to the exact one.
    pub fallback_count: usize,
    /// Block width of the most recent LOBPCG call (pairs computed).
    pub last_block_width: usize,
}

impl ProjectionContext {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        Self {
            n,
            cold: true,
            last_pos_count: 0,
            last_neg_count: 0,
            mode: ProjectionMode::ExactFull,
            warm: None,
            error_budget_log: Vec::new(),
            fallback_count: 0,
            last_block_width: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_cold(&self) -> bool {
        self.cold
    }

    /// Test/bench helper: pretend the previous iteration saw these counts.
    pub fn with_counts(n: usize, pos: usize, neg: usize) -> Self {
        let mut ctx = Self::new(n);
        ctx.cold = false;
        ctx.last_pos_count = pos;
        ctx.last_neg_count = neg;
        ctx
    }
}

/// Side-selection policy: approximate the side estimated to hold fewer than a
/// third of the eigenvectors, otherwise decompose fully.
pub fn select_mode(ctx: &ProjectionContext) -> ProjectionMode {
    if ctx.cold {
        return ProjectionMode::ExactFull;
    }
    let third = ctx.n as f64 / 3.0;
    let pos_small = (ctx.last_pos_count as f64) < third;
    let neg_small = (ctx.last_neg_count as f64) < third;
    match (pos_small, neg_small) {
        (true, true) => {
            if ctx.last_neg_count < ctx.last_pos_count {
                ProjectionMode::ApproxNegative
            } else {
                ProjectionMode::ApproxPositive
            }
        }
        (true, false) => ProjectionMode::ApproxPositive,
        (false, true) => ProjectionMode::ApproxNegative,
        (false, false) => ProjectionMode::ExactFull,
    }
}

/// Relative threshold below which an eigenvalue counts as zero for the
/// side-selection sign counts.
fn zero_tolerance(a: &SymMatrix) -> f64 {
    1e-9 * (1.0 + a.fro_norm())
}

/// Exact projection via the full eigendecomposition, with the sign counts the
/// side-selection policy needs. Eigenvalues within the zero tolerance count as
/// neither positive nor negative.
pub fn project_exact(a: &SymMatrix) -> Result<(SymMatrix, usize, usize), LinalgError> {
    let (proj, pos, neg, _) = exact_with_pairs(a)?;
    Ok((proj, pos, neg))
}

fn exact_with_pairs(a: &SymMatrix) -> Result<(SymMatrix, usize, usize, EigPairs), LinalgError> {
    let pairs = full_symmetric_eig(a)?;
    let tol = zero_tolerance(a);
    let pos = pairs.values.iter().filter(|&&v| v > tol).count();
    let neg = pairs.values.iter().filter(|&&v| v < -tol).count();
    let n = a.dim();
    let mut acc = DMatrix::zeros(n, n);
    for i in 0..n {
        let lam = pairs.values[i];
        if lam > 0.0 {
            let v = pairs.vectors.column(i);
            acc += v * v.transpose() * lam;
        }
    }
    Ok((SymMatrix::from_dense(&acc), pos, neg, pairs))
}

/// Projects approximately according to `ctx.mode`, returning the projection
/// and its error bound. Updates the context (sign counts, warm start, budget
/// log) for the next iteration. Falls back to the exact path when LOBPCG does
/// not converge within its inner cap.
pub fn project_approx(
    a: &SymMatrix,
    ctx: &mut ProjectionContext,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(SymMatrix, f64), LinalgError> {
    let n = a.dim();
    assert_eq!(n, ctx.n, "context dimension mismatch");
    match ctx.mode {
        ProjectionMode::ExactFull => {
            let proj = finish_exact(a, ctx)?;
            Ok((proj, 0.0))
        }
        ProjectionMode::ApproxPositive | ProjectionMode::ApproxNegative => {
            let side = match ctx.mode {
                ProjectionMode::ApproxPositive => Side::Positive,
                _ => Side::Negative,
            };
            let state = warm_or_cold_state(ctx, side, rng);
            let expand_by = ((n as f64 * 0.05).ceil() as usize).max(1);
            let (ritz, state_out, report) =
                lobpcg(a, state, tol, LOBPCG_MAX_INNER, expand_by, rng)?;
            ctx.last_block_width = report.block_width;
            if report.status == LobpcgStatus::NotConverged {
                ctx.fallback_count += 1;
                let proj = finish_exact(a, ctx)?;
                return Ok((proj, 0.0));
            }
            let _ = state_out;
            let proj = match side {
                Side::Positive => one_sided_reconstruction(n, &ritz),
                Side::Negative => {
                    SymMatrix::from_dense(&(a.to_dense() - one_sided_reconstruction(n, &ritz).to_dense()))
                }
            };
            let error_bound = (2.0 * ritz.residual_fro_sq()).sqrt();
            match side {
                Side::Positive => {
                    ctx.last_pos_count = ritz.len();
                    ctx.last_neg_count = n - ritz.len();
                }
                Side::Negative => {
                    ctx.last_neg_count = ritz.len();
                    ctx.last_pos_count = n - ritz.len();
                }
            }
            ctx.cold = false;
            ctx.warm = Some(LobpcgState::from_block(ritz.vectors.clone(), side));
            ctx.error_budget_log.push(error_bound);
            Ok((proj, error_bound))
        }
    }
}

/// `V diag(values) V^T` over the returned one-sided Ritz pairs.
fn one_sided_reconstruction(n: usize, ritz: &RitzSet) -> SymMatrix {
    let mut acc = DMatrix::zeros(n, n);
    for i in 0..ritz.len() {
        let v = ritz.vectors.column(i);
        acc += v * v.transpose() * ritz.values[i];
    }
    SymMatrix::from_dense(&acc)
}

/// Exact decomposition plus context bookkeeping: updates counts, seeds the
/// next warm start from the one-sided eigenvectors when the next call will be
/// approximate, and logs a zero error bound.
fn finish_exact(a: &SymMatrix, ctx: &mut ProjectionContext) -> Result<SymMatrix, LinalgError> {
    let (proj, pos, neg, pairs) = exact_with_pairs(a)?;
    ctx.last_pos_count = pos;
    ctx.last_neg_count = neg;
    ctx.cold = false;
    ctx.warm = match select_mode(ctx) {
        ProjectionMode::ApproxPositive => Some(LobpcgState::from_block(
            side_vectors(a, &pairs, Side::Positive),
            Side::Positive,
        )),
        ProjectionMode::ApproxNegative => Some(LobpcgState::from_block(
            side_vectors(a, &pairs, Side::Negative),
            Side::Negative,
        )),
        ProjectionMode::ExactFull => None,
    };
    ctx.error_budget_log.push(0.0);
    Ok(proj)
}

/// One-sided eigenvectors from an exact decomposition, used as a warm block.
fn side_vectors(a: &SymMatrix, pairs: &EigPairs, side: Side) -> DMatrix<f64> {
    let tol = zero_tolerance(a);
    let n = a.dim();
    let idx: Vec<usize> = match side {
        Side::Positive => (0..n).filter(|&i| pairs.values[i] > tol).collect(),
        Side::Negative => (0..n).filter(|&i| pairs.values[i] < -tol).collect(),
    };
    if idx.is_empty() {
        // Nothing on that side yet; a single column keeps the block nonempty.
        return pairs.vectors.columns(0, 1).into_owned();
    }
    let mut out = DMatrix::zeros(n, idx.len());
    for (dst, &src) in idx.iter().enumerate() {
        out.set_column(dst, &pairs.vectors.column(src));
    }
    out
}

/// Resume from the stored warm block widened by one random column, or start a
/// cold block of width `max(ceil(0.1 n), 1)`.
fn warm_or_cold_state(
    ctx: &mut ProjectionContext,
    side: Side,
    rng: &mut ChaCha8Rng,
) -> LobpcgState {
    let n = ctx.n;
    match ctx.warm.take() {
        Some(state) if state.side == side && state.x.ncols() >= 1 => {
            if state.x.ncols() >= n {
                return LobpcgState::from_block(state.x.columns(0, n).into_owned(), side);
            }
            let m = state.x.ncols();
            let mut widened = DMatrix::zeros(n, m + 1);
            widened.view_mut((0, 0), (n, m)).copy_from(&state.x);
            let mut extra = nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-1.0f64..1.0));
            extra -= &state.x * (state.x.tr_mul(&extra));
            let norm = extra.norm();
            if norm > 1e-10 {
                widened.set_column(m, &(extra / norm));
                LobpcgState::from_block(widened, side)
            } else {
                LobpcgState::from_block(state.x, side)
            }
        }
        _ => {
            let m0 = ((n as f64 * 0.1).ceil() as usize).max(1);
            LobpcgState::cold(n, m0, side, rng)
        }
    }
}
