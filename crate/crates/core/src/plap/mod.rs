//! The p-Laplacian: discrete energy, operator, Dirichlet solver and first
//! eigenpair.

mod banded;
mod eigen;
mod operator;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eigen::{rayleigh_quotient, solve_eigenpair, Eigenpair};
pub use operator::{apply_plap, boundary_flux, discrete_energy};
pub use solver::{solve_dirichlet, solve_dirichlet_from};

/// Settings shared by every nonlinear solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreConfig {
    /// `δ` in the energy density `(|∇u|² + δ)^{p/2}`.
    pub delta_reg: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease factor of the backtracking line search.
    pub armijo: f64,
}

impl Default for CoreConfig {
    fn default() -> Self {
        Self {
            delta_reg: 1e-10,
            tol: 1e-10,
            max_iter: 200,
            armijo: 1e-4,
        }
    }
}

impl CoreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 1e-14 && self.tol.is_finite()) {
            return Err(Error::InvalidInput(format!("tol must be >= 1e-14, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidInput("max_iter must be >= 1".into()));
        }
        if !(self.delta_reg >= 0.0 && self.delta_reg.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "delta_reg must be >= 0, got {}",
                self.delta_reg
            )));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(Error::InvalidInput(format!(
                "armijo must lie in (0, 0.5), got {}",
                self.armijo
            )));
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_sup: f64,
    pub energy: f64,
    pub sup_norm: f64,
    pub grad_sup_norm: f64,
    pub converged: bool,
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("p must exceed 1, got {p}")))
    }
}
