// Indexed loops are clearer than iterator chains in most of this
// numerical code.
#![allow(clippy::needless_range_loop)]

//! Partial least squares and principal component regression for
//! scalar-on-function linear models.
//!
//! Curves are grid samples with quadrature weights; the model is
//! `Y = a + integral(b X) + noise` with a functional slope `b`. The crate
//! provides:
//!
//! - [`space`]: grids, curves, kernels and the quadrature inner products.
//! - [`cov`]: empirical covariance and cross-covariance estimators and the
//!   sequence of iterated covariance-operator applications.
//! - [`apls`]: three PLS fitters built on that explicit sequence — a raw
//!   normal-equation solve and two numerically stabilized variants.
//! - [`classic`]: the conventional iterative PLS with deflation, as an
//!   independent cross-check.
//! - [`pca`]: principal-component basis regression, the standard
//!   comparison method.
//! - [`gram`]: modified Gram–Schmidt over a pluggable scalar product,
//!   shared by the stabilized fitters.
//! - [`population`]: exact population quantities for finite-rank spectral
//!   models, the ground truth behind the test suites.
//! - [`sim`] / [`mod@bench`]: seeded data simulation, train/test
//!   benchmarking and Monte Carlo rate verification.
//! - [`metrics`]: relative norms, condition estimates and the shared
//!   tolerance ledger.
//! - [`io`]: CSV/JSON formats for datasets, fitted models and benchmark
//!   output.

pub mod apls;
pub mod bench;
pub mod classic;
pub mod cov;
pub mod error;
pub mod gram;
pub mod io;
pub mod metrics;
pub mod pca;
pub mod population;
pub mod sim;
pub mod space;

pub use error::{Error, Result};
pub use space::{Curve, Dataset, Grid, Kernel};
