//! Matrix-level simulation and cost benchmarking of the kernel-reflection
//! ("shortcut") quantum linear-system solver.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense matrices, Jacobi SVD, direct solves, state distances
//!   and Clenshaw-Curtis quadrature;
//! * [`instance`]: seeded ensembles of test systems;
//! * [`filter`]: the Chebyshev projection and reflection polynomials;
//! * [`engine`]: augmentation, kernel operators, KR and KP runs;
//! * [`norm_search`]: unknown-norm averaging and η calibration;
//! * [`bench`]: cost model, Δ sweeps, baselines, comparison and reports.
//!
//! Numerical code is generic over [`Real`] (`f32`, `f64`); the aliases
//! below fix it to `f64`, which is what the benchmarks use.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod engine;
pub mod error;
pub mod filter;
pub mod instance;
pub mod linalg;
pub mod norm_search;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix = linalg::DenseMatrix<f64>;
pub type State = linalg::StateVector<f64>;
pub type Svd = linalg::SvdFactors<f64>;
pub type Filter = filter::FilterSpec<f64>;
pub type Instance = instance::ProblemInstance<f64>;
