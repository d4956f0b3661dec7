//! Sparse and dense linear algebra.

mod dense;
mod eig;
mod infsup;
mod lu;
mod ordering;
mod sparse;

pub use dense::{axpy, dot, gemm, norm2, norm_inf, Cholesky, DenseLu, DenseMatrix};
pub use eig::{sym_eig, SYMMETRY_TOL};
pub use infsup::smallest_generalized_singular_value;
pub use lu::SparseLu;
pub use ordering::minimum_degree;
pub use sparse::SparseMatrix;
