//! Low-rank multivariate regression.
//!
//! The model is `Y = X A0 + E` with `Y` of size `n x T`, `X` of size `n x p`
//! and a coefficient matrix `A0` of small rank. The crate provides
//!
//! * [`matlin`]: thin SVD, Eckart-Young truncation, singular value
//!   thresholding and the projections onto `col(X)` and `rg(X^T)`;
//! * [`design`]: the pseudo-RIP quantities of a design (`sigma_q(X)`,
//!   `mu = 1/sigma_q`, `eta = sigma_1/sigma_q`);
//! * [`estimators`]: reduced-rank fits, rank selection and the
//!   nuclear-norm-penalized estimator;
//! * [`bounds`]: oracle-inequality right-hand sides and their comparison
//!   with the realized prediction error;
//! * [`simkit`]: seeded data generation and a Monte Carlo harness;
//! * [`cli`]: the command-line front end and its file formats.

pub mod bounds;
pub mod cli;
pub mod design;
pub mod error;
pub mod estimators;
pub mod matlin;
pub mod simkit;

pub use error::{Error, Result};
pub use matlin::{Mat, ThinSvd};
