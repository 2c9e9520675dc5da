//! Simulation and analysis of a nuclear spin maser with feedback and an
//! oscillating bias field.
//!
//! The crate integrates the nonlinear Bloch equations, provides the closed
//! form transient and Floquet sideband models, and turns recorded signals
//! into spectra, fitted parameters and sensitivity estimates.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod analytic;
pub mod bessel;
pub mod bloch;
pub mod cli;
pub mod config;
pub mod constants;
pub mod error;
pub mod fit;
pub mod floquet;
pub mod integrator;
pub mod io;
pub mod metrology;
pub mod presets;
pub mod series;
pub mod spectral;
pub mod state;

pub use config::ExperimentConfig;
pub use constants::PhysicalConstants;
pub use error::{Error, Result};
pub use series::TimeSeries;
pub use state::PolarizationState;
