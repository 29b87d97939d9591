//! Inverse-iteration eigensolver for discretized quasilinear operator pairs.
//!
//! The library computes eigenpairs `(lambda, w)` of
//!
//! ```text
//! A(w) = lambda * ||w||_Y^{p-q} * B(w),    ||w||_Y = 1
//! ```
//!
//! where `A` is (p-1)-homogeneous (a discrete p-Laplacian variant) and `B`
//! is (q-1)-homogeneous, by inverse power iteration: each outer step solves
//! `A(u_{n+1}) = B(w_n)` and renormalizes. The iteration drives the Rayleigh
//! quotient `lambda_n = ||u_{n+1}||_Y^{1-p}` downward monotonically, and the
//! engine checks that monotonicity (and the two-sided norm bounds behind it)
//! at every step.
//!
//! Modules:
//!
//! * [`space`]: grids, nodal fields, dual vectors, discrete X and Y norms.
//! * [`operators`]: the four operator pair discretizations plus regularized
//!   variants and hypothesis checking.
//! * [`inner`]: the inner solve `A(u) = f` (direct for p = 2, annealed
//!   Newton otherwise).
//! * [`engine`]: the outer iteration with invariant ledger and trace.
//! * [`oracle`]: independent slow-path checks (dense eigensolve for p = 2,
//!   projected-gradient Rayleigh minimization, brute-force double sums).
//! * [`linalg`]: the banded/dense Cholesky and PCG kernels.

pub mod engine;
pub mod error;
pub mod inner;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod space;

pub use error::{Error, Result};
