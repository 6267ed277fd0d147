//! Linear algebra kernels: complex vectors, dense hermitian eigensolver,
//! sparse CSR storage and banded direct factorizations.

pub mod banded;
pub mod dense;
pub mod sparse;
pub mod tridiag;
pub mod vector;

pub use banded::{BandedCholesky, BandedLu};
pub use dense::{DenseMatrix, HermitianEigen};
pub use sparse::{CsrMatrix, LinearOperator, TripletBuilder};

pub type C64 = num_complex::Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
