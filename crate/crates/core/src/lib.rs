//! First-order conic solver built around ADMM with residual-controlled
//! approximate projections onto the positive semidefinite cone.

pub mod cones;
pub mod eigsolver;
pub mod linalg;
pub mod projection;

pub use linalg::{
    cholesky_qr, full_symmetric_eig, ldl_factorize, ldl_solve, smat, svec, EigPairs, LinalgError,
    QuasidefFactor, SparseMatrix, SymMatrix,
};
