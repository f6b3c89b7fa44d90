//! Minimizers at fixed ε: the closed-form `w_ε`, the discrete quadratic solve,
//! a descent method for general potentials, the weighted-TV proximal step and
//! alternating minimization of the KWC energy.

mod kwc;
mod prox;
mod smm;
pub(crate) mod tridiag;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kwc::{minimize_kwc_alternating, KwcResult};
pub use prox::prox_weighted_tv;
pub use smm::{
    closed_form_minimizer, minimize_smm_b_general, minimize_smm_b_quadratic, smm_b_el_residual,
    ClosedFormMinimizer,
};
pub(crate) use smm::{minimize_smm_b_general_from, solve_quadratic_stencils, PenaltyStencil};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Always take the full preconditioned step.
    Fixed,
    /// Armijo backtracking by halving.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub rounds: usize,
    pub step_rule: StepRule,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-10,
            rounds: 200,
            step_rule: StepRule::Backtracking,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Argument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 || self.rounds == 0 {
            return Err(Error::Argument("iteration and round limits must be at least 1".into()));
        }
        Ok(())
    }
}
