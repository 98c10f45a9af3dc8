//! Discretization, solvers and property checks for the weighted eigenvalue
//! problem of the mixed local/nonlocal p-Laplacian
//!
//! ```text
//! -Δp u + (-Δp)^s u + V |u|^{p-2} u = λ g |u|^{p-2} u   in Ω,
//!                                  u = 0               in ℝᴺ \ Ω.
//! ```
//!
//! The crate is `no_std` (it needs `alloc`) and deterministic: every
//! reduction runs in a fixed order, so identical inputs give bit-identical
//! outputs. File formats, configuration and the command line live in the
//! companion `mixeig` crate.
#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod energy;
mod error;
pub mod kernel;
pub mod mesh;
pub mod oracle;
pub mod presets;
pub mod properties;
pub mod quadrature;
pub mod solver;

pub use energy::{FormBreakdown, OperatorMode, Problem};
pub use error::{Error, Result};
pub use kernel::KernelWeights;
pub use mesh::{Field, Grid, Sign};
pub use solver::{EigenPair, SolverConfig};
