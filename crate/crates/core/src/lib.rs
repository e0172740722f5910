//! Generalized fractional Brownian motion.
//!
//! The process is the Gaussian integral
//! `X(t) = c * int ((t-u)_+^a - (-u)_+^a) |u|^{-g/2} B(du)`, a self-similar
//! generalization of fractional Brownian motion whose increments are not
//! stationary once `g > 0`. This crate evaluates its covariance kernels,
//! simulates it exactly and by discretizing the integral, and checks its path
//! properties numerically.

pub mod analysis;
pub mod error;
pub mod io;
pub mod kernels;
pub mod params;
pub mod quadrature;
pub mod simulation;
pub mod special;

pub use error::{GfbmError, Result};
pub use kernels::KernelContext;
pub use params::{ModelParams, Regime, RegionLabel, Variant};
pub use quadrature::{IntegralResult, QuadratureSpec};
pub use simulation::{Grid, Method, PathEnsemble, RiemannSpec};
