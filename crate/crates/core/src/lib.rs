//! Robust weighted likelihood estimation of wrapped normal models on the
//! p-torus.
//!
//! The crate provides the wrapped normal density with lattice truncation, EM and
//! classification EM fits, their weighted counterparts driven by Pearson
//! residuals and residual adjustment functions, outlier detection, and a
//! seeded Monte Carlo harness.

pub mod detection;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod kde;
pub mod numeric;
pub mod par;
pub mod raf;
pub mod residual;
pub mod table;
pub mod torus;

pub use error::{Error, Result};
