//! Composite translated-cone set: blockwise projection, recession-cone and
//! polar-cone distances, the support function, and a Cholesky-based
//! membership test. These are the ingredients of the practical infeasibility
//! checks.

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{full_symmetric_eig, smat, svec, tri_len, LinalgError, SymMatrix};
use crate::projection::{project_approx, select_mode, ProjectionContext, ProjectionMode};

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("vector length {got} does not match cone dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("psd context count {got} does not match psd block count {expected}")]
    ContextMismatch { got: usize, expected: usize },
    #[error("invalid cone block: {0}")]
    InvalidBlock(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Kind of one cone block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BlockKind {
    /// The origin; translated, it pins coordinates to the translation.
    Zero,
    /// Nonnegative orthant.
    Nonnegative,
    /// Positive semidefinite matrices of the given side length, stored as
    /// packed triangles of dimension `n (n + 1) / 2` in svec coordinates.
    PsdTriangle(usize),
}

/// One block of the composite set: a cone of the given kind translated by `b`.
#[derive(Debug, Clone)]
pub struct ConeBlock {
    pub kind: BlockKind,
    pub translation: DVector<f64>,
}

impl ConeBlock {
    pub fn zero(translation: DVector<f64>) -> Self {
        Self {
            kind: BlockKind::Zero,
            translation,
        }
    }

    pub fn nonnegative(translation: DVector<f64>) -> Self {
        Self {
            kind: BlockKind::Nonnegative,
            translation,
        }
    }

    pub fn psd(n: usize, translation: DVector<f64>) -> Self {
        Self {
            kind: BlockKind::PsdTriangle(n),
            translation,
        }
    }

    pub fn psd_untranslated(n: usize) -> Self {
        Self::psd(n, DVector::zeros(tri_len(n)))
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }
}

/// Ordered Cartesian product of translated cone blocks.
#[derive(Debug, Clone)]
pub struct ConeSet {
    blocks: Vec<ConeBlock>,
    total_dim: usize,
}

impl ConeSet {
    pub fn new(blocks: Vec<ConeBlock>) -> Result<Self, ConeError> {
        if blocks.is_empty() {
            return Err(ConeError::InvalidBlock("cone set must be nonempty".into()));
        }
        let mut total = 0usize;
        for block in &blocks {
            if block.translation.iter().any(|v| !v.is_finite()) {
                return Err(ConeError::InvalidBlock(
                    "translation has non-finite entries".into(),
                ));
            }
            match block.kind {
                BlockKind::PsdTriangle(n) => {
                    if n == 0 || block.translation.len() != tri_len(n) {
                        return Err(ConeError::InvalidBlock(format!(
                            "psd block of order {n} needs translation length {}, got {}",
                            tri_len(n),
                            block.translation.len()
                        )));
                    }
                }
                _ => {
                    if block.dim() == 0 {
                        return Err(ConeError::InvalidBlock("empty block".into()));
                    }
                }
            }
            total += block.dim();
        }
        Ok(Self {
            blocks,
            total_dim: total,
        })
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn blocks(&self) -> &[ConeBlock] {
        &self.blocks
    }

    /// Orders of the PSD blocks, in block order.
    pub fn psd_orders(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter_map(|b| match b.kind {
                BlockKind::PsdTriangle(n) => Some(n),
                _ => None,
            })
            .collect()
    }

    /// Fresh projection contexts, one per PSD block.
    pub fn fresh_contexts(&self) -> Vec<ProjectionContext> {
        self.psd_orders()
            .into_iter()
            .map(ProjectionContext::new)
            .collect()
    }

    fn check_len(&self, len: usize) -> Result<(), ConeError> {
        if len != self.total_dim {
            return Err(ConeError::DimensionMismatch {
                got: len,
                expected: self.total_dim,
            });
        }
        Ok(())
    }
}

/// Blockwise projection of `v` onto the translated-cone product.
///
/// PSD blocks go through the residual-controlled approximate path when
/// `approx` is set (mode chosen by the per-block side-selection policy),
/// otherwise through the exact decomposition. The second return value is the
/// root-sum-square of the per-block projection error bounds; exact blocks
/// contribute zero.
pub fn project(
    cs: &ConeSet,
    v: &DVector<f64>,
    contexts: &mut [ProjectionContext],
    tol: f64,
    approx: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(DVector<f64>, f64), ConeError> {
    cs.check_len(v.len())?;
    let psd_count = cs.psd_orders().len();
    if contexts.len() != psd_count {
        return Err(ConeError::ContextMismatch {
            got: contexts.len(),
            expected: psd_count,
        });
    }
    let mut out = DVector::zeros(cs.total_dim);
    let mut bound_sq = 0.0f64;
    let mut offset = 0usize;
    let mut psd_idx = 0usize;
    for block in &cs.blocks {
        let d = block.dim();
        let b = &block.translation;
        let slice = v.rows(offset, d);
        match block.kind {
            BlockKind::Zero => {
                out.rows_mut(offset, d).copy_from(b);
            }
            BlockKind::Nonnegative => {
                for i in 0..d {
                    out[offset + i] = b[i] + (slice[i] - b[i]).max(0.0);
                }
            }
            BlockKind::PsdTriangle(_) => {
                let shifted: Vec<f64> = (0..d).map(|i| slice[i] - b[i]).collect();
                let m = smat(&shifted)?;
                let ctx = &mut contexts[psd_idx];
                ctx.mode = if approx {
                    select_mode(ctx)
                } else {
                    ProjectionMode::ExactFull
                };
                let (proj, bound) = project_approx(&m, ctx, tol, rng)?;
                let pv = svec(&proj);
                for i in 0..d {
                    out[offset + i] = b[i] + pv[i];
                }
                bound_sq += bound * bound;
                psd_idx += 1;
            }
        }
        offset += d;
    }
    Ok((out, bound_sq.sqrt()))
}

/// Distance to the recession cone of the set (translations dropped).
pub fn dist_recession(cs: &ConeSet, v: &DVector<f64>) -> Result<f64, ConeError> {
    cs.check_len(v.len())?;
    let mut acc = 0.0f64;
    let mut offset = 0usize;
    for block in &cs.blocks {
        let d = block.dim();
        let slice = v.rows(offset, d);
        match block.kind {
            BlockKind::Zero => {
                acc += slice.norm_squared();
            }
            BlockKind::Nonnegative => {
                for i in 0..d {
                    acc += slice[i].min(0.0).powi(2);
                }
            }
            BlockKind::PsdTriangle(_) => {
                let m = smat(slice.as_slice())?;
                let pairs = full_symmetric_eig(&m)?;
                for &lam in pairs.values.iter() {
                    if lam < 0.0 {
                        acc += lam * lam;
                    }
                }
            }
        }
        offset += d;
    }
    Ok(acc.sqrt())
}

/// Distance to the polar of the (untranslated) cone product.
pub fn dist_polar(cs: &ConeSet, y: &DVector<f64>) -> Result<f64, ConeError> {
    cs.check_len(y.len())?;
    let mut acc = 0.0f64;
    let mut offset = 0usize;
    for block in &cs.blocks {
        let d = block.dim();
        let slice = y.rows(offset, d);
        match block.kind {
            // The polar of the origin is the whole space.
            BlockKind::Zero => {}
            // The polar of the nonnegative orthant is the nonpositive orthant.
            BlockKind::Nonnegative => {
                for i in 0..d {
                    acc += slice[i].max(0.0).powi(2);
                }
            }
            // The polar of the PSD cone is the negative semidefinite cone.
            BlockKind::PsdTriangle(_) => {
                let m = smat(slice.as_slice())?;
                let pairs = full_symmetric_eig(&m)?;
                for &lam in pairs.values.iter() {
                    if lam > 0.0 {
                        acc += lam * lam;
                    }
                }
            }
        }
        offset += d;
    }
    Ok(acc.sqrt())
}

/// Support function of the translated set at `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportValue {
    Finite(f64),
    PlusInfinity,
}

impl SupportValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, SupportValue::Finite(_))
    }
}

/// `b^T y` when `y` lies in the polar of the cone (within 1e-9), unbounded
/// otherwise. The infeasibility test needs the dichotomy, not a magnitude.
pub fn support_value(cs: &ConeSet, y: &DVector<f64>) -> Result<SupportValue, ConeError> {
    cs.check_len(y.len())?;
    if dist_polar(cs, y)? > 1e-9 {
        return Ok(SupportValue::PlusInfinity);
    }
    let mut acc = 0.0f64;
    let mut offset = 0usize;
    for block in &cs.blocks {
        let d = block.dim();
        acc += block.translation.dot(&y.rows(offset, d));
        offset += d;
    }
    Ok(SupportValue::Finite(acc))
}

/// PSD membership via Cholesky: true iff `M + shift I` factors.
pub fn membership_psd(m: &SymMatrix, shift: f64) -> bool {
    assert!(shift >= 0.0, "shift must be nonnegative");
    let mut dense = m.to_dense();
    for i in 0..m.dim() {
        dense[(i, i)] += shift;
    }
    nalgebra::Cholesky::new(dense).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormalize_span;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn exact_project(cs: &ConeSet, v: &DVector<f64>) -> DVector<f64> {
        let mut ctxs = cs.fresh_contexts();
        let mut r = rng(0);
        project(cs, v, &mut ctxs, 1e-9, false, &mut r).unwrap().0
    }

    #[test]
    fn nonnegative_block_clamps() {
        let cs = ConeSet::new(vec![ConeBlock::nonnegative(DVector::zeros(2))]).unwrap();
        let out = exact_project(&cs, &DVector::from_vec(vec![-1.0, 2.0]));
        assert_eq!(out.as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn translated_zero_block_pins_to_translation() {
        let cs = ConeSet::new(vec![ConeBlock::zero(DVector::from_vec(vec![5.0]))]).unwrap();
        let out = exact_project(&cs, &DVector::from_vec(vec![-123.0]));
        assert_eq!(out.as_slice(), &[5.0]);
    }

    #[test]
    fn psd_block_projects_through_svec() {
        let cs = ConeSet::new(vec![ConeBlock::psd_untranslated(2)]).unwrap();
        let v = svec(&SymMatrix::from_diagonal(&[1.0, -1.0]));
        let mut ctxs = cs.fresh_contexts();
        let mut r = rng(1);
        let (out, bound) = project(&cs, &v, &mut ctxs, 1e-9, true, &mut r).unwrap();
        // Cold context: the first pass is an exact decomposition, bound 0.
        assert_eq!(bound, 0.0);
        let expected = svec(&SymMatrix::from_diagonal(&[1.0, 0.0]));
        assert!((out - expected).norm() <= 1e-10);
    }

    #[test]
    fn recession_distance_examples() {
        let zero = ConeSet::new(vec![ConeBlock::zero(DVector::from_vec(vec![7.0]))]).unwrap();
        assert!((dist_recession(&zero, &DVector::from_vec(vec![3.0])).unwrap() - 3.0).abs() < 1e-12);

        let nonneg = ConeSet::new(vec![ConeBlock::nonnegative(DVector::from_vec(vec![4.0, 4.0]))])
            .unwrap();
        // Member of the recession cone regardless of the translation.
        assert_eq!(
            dist_recession(&nonneg, &DVector::from_vec(vec![1.0, 0.0])).unwrap(),
            0.0
        );

        let psd = ConeSet::new(vec![ConeBlock::psd_untranslated(2)]).unwrap();
        let v = svec(&SymMatrix::from_diagonal(&[1.0, -2.0]));
        assert!((dist_recession(&psd, &v).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn polar_distance_and_support() {
        let nonneg = ConeSet::new(vec![ConeBlock::nonnegative(DVector::from_vec(vec![1.0, 1.0]))])
            .unwrap();
        let y = DVector::from_vec(vec![-1.0, -2.0]);
        assert_eq!(dist_polar(&nonneg, &y).unwrap(), 0.0);
        assert_eq!(
            support_value(&nonneg, &y).unwrap(),
            SupportValue::Finite(-3.0)
        );

        let psd = ConeSet::new(vec![ConeBlock::psd_untranslated(2)]).unwrap();
        let y_psd = svec(&SymMatrix::identity(2));
        let d = dist_polar(&psd, &y_psd).unwrap();
        assert!((d - 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(support_value(&psd, &y_psd).unwrap(), SupportValue::PlusInfinity);

        let zero = ConeSet::new(vec![ConeBlock::zero(DVector::from_vec(vec![2.0, 0.0]))]).unwrap();
        let any = DVector::from_vec(vec![13.0, -4.0]);
        assert_eq!(dist_polar(&zero, &any).unwrap(), 0.0);
        assert_eq!(support_value(&zero, &any).unwrap(), SupportValue::Finite(26.0));
    }

    #[test]
    fn membership_by_cholesky() {
        assert!(membership_psd(&SymMatrix::identity(3), 0.0));
        let nearly = SymMatrix::from_diagonal(&[1.0, -1e-3]);
        assert!(!membership_psd(&nearly, 0.0));
        assert!(membership_psd(&nearly, 1e-2));

        // Random PSD with eigenvalues at least 0.1.
        let mut r = rng(5);
        let raw = DMatrix::from_fn(5, 5, |_, _| r.gen_range(-1.0f64..1.0));
        let q = orthonormalize_span(&raw).unwrap();
        let eigs = DVector::from_fn(5, |_, _| r.gen_range(0.1f64..3.0));
        let m = SymMatrix::from_dense(&(&q * DMatrix::from_diagonal(&eigs) * q.transpose()));
        assert!(membership_psd(&m, 0.0));
    }

    #[test]
    fn moreau_decomposition_on_untranslated_blocks() {
        let mut r = rng(8);
        // Nonnegative block.
        let v = DVector::from_fn(6, |_, _| r.gen_range(-2.0f64..2.0));
        let cs = ConeSet::new(vec![ConeBlock::nonnegative(DVector::zeros(6))]).unwrap();
        let proj = exact_project(&cs, &v);
        let polar_part = DVector::from_fn(6, |i, _| v[i].min(0.0));
        assert!((&proj + &polar_part - &v).norm() <= 1e-12);
        assert!(proj.dot(&polar_part).abs() <= 1e-12);

        // PSD block: polar part computed independently from the eigenvalues.
        let m = SymMatrix::from_dense(&DMatrix::from_fn(4, 4, |_, _| r.gen_range(-1.0f64..1.0)));
        let v = svec(&m);
        let cs = ConeSet::new(vec![ConeBlock::psd_untranslated(4)]).unwrap();
        let proj = exact_project(&cs, &v);
        let pairs = full_symmetric_eig(&m).unwrap();
        let mut neg = DMatrix::zeros(4, 4);
        for i in 0..4 {
            if pairs.values[i] < 0.0 {
                let col = pairs.vectors.column(i);
                neg += col * col.transpose() * pairs.values[i];
            }
        }
        let polar_part = svec(&SymMatrix::from_dense(&neg));
        assert!((&proj + &polar_part - &v).norm() <= 1e-8);
        assert!(proj.dot(&polar_part).abs() <= 1e-8);
    }

    #[test]
    fn distances_vanish_exactly_on_members() {
        let cs = ConeSet::new(vec![
            ConeBlock::nonnegative(DVector::zeros(2)),
            ConeBlock::psd_untranslated(3),
        ])
        .unwrap();
        let mut r = rng(9);
        // Construct a member: nonnegative entries and a PSD matrix.
        let raw = DMatrix::from_fn(3, 3, |_, _| r.gen_range(-1.0f64..1.0));
        let psd_mat = SymMatrix::from_dense(&(raw.transpose() * &raw));
        let mut member = DVector::zeros(cs.total_dim());
        member[0] = 0.5;
        member[1] = 0.0;
        member.rows_mut(2, 6).copy_from(&svec(&psd_mat));
        assert_eq!(dist_recession(&cs, &member).unwrap(), 0.0);
        // Its negation lies in the polar.
        let negated = -member;
        assert_eq!(dist_polar(&cs, &negated).unwrap(), 0.0);
        // A non-member has strictly positive distance, matching the explicit
        // eigenvalue check for the PSD part.
        let mut outside = DVector::zeros(cs.total_dim());
        outside[0] = -1.0;
        outside.rows_mut(2, 6).copy_from(&svec(&SymMatrix::from_diagonal(&[
            1.0, -0.5, 0.2,
        ])));
        let d = dist_recession(&cs, &outside).unwrap();
        assert!((d - (1.0f64 + 0.25).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cs = ConeSet::new(vec![ConeBlock::nonnegative(DVector::zeros(2))]).unwrap();
        let mut ctxs = cs.fresh_contexts();
        let mut r = rng(4);
        let bad = DVector::from_vec(vec![1.0]);
        assert!(matches!(
            project(&cs, &bad, &mut ctxs, 1e-6, false, &mut r),
            Err(ConeError::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn projection_is_nonexpansive(
            a in proptest::collection::vec(-3.0f64..3.0, 9),
            b in proptest::collection::vec(-3.0f64..3.0, 9),
        ) {
            // Mixed set: 1 zero + 2 nonneg + 3x3 psd triangle = 9 coordinates.
            let cs = ConeSet::new(vec![
                ConeBlock::zero(DVector::from_vec(vec![0.3])),
                ConeBlock::nonnegative(DVector::from_vec(vec![-0.1, 0.2])),
                ConeBlock::psd_untranslated(3),
            ]).unwrap();
            let u = DVector::from_vec(a);
            let v = DVector::from_vec(b);
            let pu = exact_project(&cs, &u);
            let pv = exact_project(&cs, &v);
            prop_assert!((pu - pv).norm() <= (u - v).norm() + 1e-9);
        }
    }
}
