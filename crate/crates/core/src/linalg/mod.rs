//! Dense symmetric-matrix kernels shared by the solver: packed symmetric
//! storage with isometric vectorization, full eigendecomposition, Cholesky-QR
//! orthonormalization, quasidefinite LDL factorization, and a minimal CSC
//! sparse matrix for problem data.

mod cholqr;
mod eig;
mod ldl;
mod sparse;
mod sym;

pub use cholqr::{cholesky_qr, orthonormalize_span};
pub(crate) use eig::full_symmetric_eig_dense;
pub use eig::{full_symmetric_eig, EigPairs};
pub use ldl::{ldl_factorize, ldl_solve, QuasidefFactor};
pub use sparse::SparseMatrix;
pub use sym::{smat, svec, tri_dim, tri_index, tri_len, SymMatrix};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("vector of length {0} is not a packed symmetric triangle")]
    NotTriangular(usize),
    #[error("input contains non-finite entries")]
    NonFinite,
    #[error("gram matrix is numerically rank deficient")]
    RankDeficient,
    #[error("trial subspace is numerically degenerate")]
    SubspaceDegenerate,
    #[error("zero pivot at index {0} during ldl factorization")]
    ZeroPivot(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
