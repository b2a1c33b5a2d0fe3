// SPDX-License-Identifier: Apache-2.0

//! Numerical construction and certification of similarity transforms
//! `I + K` that intertwine a multiplication operator `S` with its
//! Volterra-type perturbation `T = S + V` on `L2(a, b)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] discretizes the interval with midpoint quadrature.
//! * [`operator`] holds strictly lower-triangular kernel operators, the
//!   multiplication operator, and the majorization calculus on them.
//! * [`majorants`] derives the majorant `W`, convolution bounds, Schur
//!   bounds, truncations and the preset kernel catalog.
//! * [`transform`] runs the successive-approximation scheme for
//!   `[S, K] + V K + V = 0`, certifies it and inverts `I + K`.
//! * [`evolution`] compares `exp(itT)` with the conjugated group.
//! * [`scenario`] and [`report`] drive all of the above from a config file.

pub mod error;
pub mod evolution;
pub mod func;
pub mod grid;
pub mod integrate;
pub mod linalg;
pub mod majorants;
pub mod operator;
pub mod report;
pub mod scenario;
pub mod special;
pub mod transform;

pub use error::{Error, Result};
pub use func::{KernelFn, ScalarFn};
pub use grid::{Grid, GridFunction};
pub use operator::{EntryMode, KernelOperator, MultiplicationOperator};

/// Version string embedded in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
