//! Probability of correct track-to-measurement association for a
//! constant-velocity target whose track may absorb false measurements.
//!
//! The crate is organised bottom-up:
//!
//! - [`quadrature`]: the upper-tail `erfc` convention, Gauss–Hermite and
//!   Gauss–Legendre rules, adaptive Gauss–Kronrod integration.
//! - [`geometry`]: the batch regression model, its hat/residual projectors and
//!   the closed-form projection coefficients.
//! - [`single_fa`]: one false measurement; exact probability, the indicator
//!   approximation machinery and the closed forms built on it.
//! - [`multi_fa`]: several false measurements through compound laws.
//! - [`dtmc`]: Markov-chain analysis of consecutive false associations.
//! - [`mc`]: the Monte Carlo oracle.
//! - [`experiment`]: the config-driven experiment runner behind the binary.
//! - [`findings`]: stated-form vs oracle discrepancy report.
//!
//! All distances are expressed in units of the measurement noise standard
//! deviation, so `lambda` is the ratio λ/σ throughout.

pub mod dtmc;
pub mod error;
pub mod experiment;
pub mod findings;
pub mod geometry;
pub mod mc;
pub mod multi_fa;
pub mod quadrature;
pub mod single_fa;

pub use error::{Error, Result};
pub use geometry::{FalseAssocSet, RegressionGeometry, ScanConfig};
pub use single_fa::IndicatorApprox;
