//! Discrete empirical interpolation (DEIM) and its oversampled variants for
//! nonlinear model reduction.
//!
//! The crate is layered bottom-up: [`linalg`] provides the dense kernels,
//! [`pod`] builds reduced bases, [`selection`] chooses sampling points,
//! [`interpolant`] applies the gappy regression operator and its error
//! bounds, [`models`] holds the toy function and the diffusion-reaction
//! model, and [`experiments`] runs the sweeps.

pub mod error;
pub mod linalg;
pub mod pod;
pub mod interpolant;
pub mod selection;
pub mod models;
pub mod experiments;
pub mod parallel;

pub use error::{Error, Result};
