//! Numerical solvers for the nonlocal reaction-diffusion equation
//!
//! ```text
//! d_t g = (1/2) Laplacian g + g (<R*g, g> - R*g),   R = phi * phi,
//! ```
//!
//! its rescaled forms, the radial self-similar problems in `d >= 2`, and
//! the diagnostics used to measure its long-time behavior.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod convolve;
pub mod error;
pub mod grid;
pub mod kernel;

pub use constants::{constants, Constants};
pub use error::{Error, Result};
pub use grid::{integrate, resample, Field1D, RadialField, RadialGrid, UniformGrid1D};
pub use kernel::{Kernel, KernelSpec};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub mod diagnostics;
pub mod evolve1d;
pub mod selfsim1d;
pub mod tridiag;
pub mod radial;
pub mod steady2d;
pub mod gaussconv;
pub mod acceptance;
