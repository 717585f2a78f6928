//! Stochastic dynamics on the probability simplex.
//!
//! The crate follows one pipeline end to end:
//!
//! 1. [`network`]: a detailed-balanced linear reaction network `Q`, its
//!    stationary vector and symmetric edge weights.
//! 2. [`jump`]: the rescaled molecule-counting process (exact SSA), its
//!    chemical master equation and the WKB log-transform of its law.
//! 3. [`geometry`]: the Onsager response matrix `K(x)`, the gradient flow it
//!    drives, and the Riemannian structure it induces on the simplex.
//! 4. [`langevin`]: Langevin dynamics on the simplex driven by degenerate noise
//!    built from `K`, in eigen-noise and edge-Brownian form.
//! 5. [`fp`]: the two-point Fokker-Planck equation with zero-flux boundaries
//!    and its closed-form Green function.
//! 6. [`wf`]: the change of variables to the Wright-Fisher diffusion.
//!
//! [`special`], [`linalg`], [`rng`] and [`stats`] are the numerical substrate,
//! and [`harness`] drives experiments from TOML configuration files.

// `!(x > 0.0)` is the NaN-rejecting form used throughout for validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod error;
pub mod fp;
pub mod geometry;
pub mod harness;
pub mod jump;
pub mod langevin;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod special;
pub mod stats;
pub mod wf;

pub use error::{Error, Result};
