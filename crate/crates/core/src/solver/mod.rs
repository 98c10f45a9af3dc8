//! Principal eigenpair by constrained descent on the Rayleigh quotient, and
//! an upper estimate of the second minimax level over symmetric circles.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::mesh::Field;
use crate::{Error, Result};

mod chol;
mod descent;
mod minimax;

pub use descent::{solve_principal, solve_principal_on_subdomain, solve_principal_restarts};
pub use minimax::{solve_second, THETA_SAMPLES};

/// Iteration controls shared by every solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when the relative decrease of the quotient stays below this for
    /// `STALL_PATIENCE` consecutive iterations.
    pub tol_quotient: f64,
    /// Stationarity threshold on max |∇N − λ∇D| / max(1, |λ|).
    pub tol_residual: f64,
    /// First trial step of every iteration, in units of p − 1 along the
    /// preconditioned direction.
    pub step0: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol_quotient: 1e-15,
            tol_residual: 1e-7,
            step0: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            seed: 0x5eed,
            restarts: 4,
        }
    }
}

/// Number of consecutive sub-`tol_quotient` iterations before giving up.
pub const STALL_PATIENCE: usize = 20;

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.into()));
        if !(self.tol_quotient > 0.0) || !(self.tol_residual > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo must lie in (0, 1)");
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return bad("step0 must be positive");
        }
        if self.restarts < 1 {
            return bad("restarts must be at least 1");
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        Ok(())
    }

    /// Seed of restart `k`, spread so neighbouring restarts are unrelated.
    pub fn restart_seed(&self, k: usize) -> u64 {
        self.seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}

/// Eigenvalue estimate and its weight-normalized eigenfunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub u: Field,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step (the first entry is the
    /// starting value).
    pub trace: Vec<f64>,
}

impl EigenPair {
    /// Flips `u` so that Σuᵢ ≥ 0.
    pub fn canonicalize(&mut self) {
        let sum: f64 = self.u.iter().sum();
        if sum < 0.0 {
            self.u.iter_mut().for_each(|v| *v = -*v);
        }
    }
}
