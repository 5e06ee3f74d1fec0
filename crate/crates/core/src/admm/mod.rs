//! Consensus ADMM for max-min SINR beamforming under per-element power limits.
//!
//! The shared beamformer `F` is copied once per power constraint
//! (`Gamma_n`) and once per SINR constraint (`Psi_k`), and the objective
//! `gamma` once per user (`eta_k`). Each outer iteration updates `gamma`,
//! the copies, the auxiliaries, `F` and the scaled error terms in turn,
//! every block in closed form.

mod solver;
mod state;
pub mod updates;

pub use solver::{
    init_state, joint_sinr_projection, project_feasible, solve, solve_problem, update_errors, update_eta,
    update_f, update_gamma, update_gamma_copy, update_lambda, update_mu, update_psi, update_theta,
    JointProjection, Problem, SolveOutcome, SolveTrace,
};
pub use state::{AdmmState, RowCopies};

use crate::error::{invalid, Result};

/// Sign convention of the projected multiplier steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiplierMode {
    /// `[m + step * violation]^+`.
    #[default]
    DualAscent,
    /// `[m - step * violation]^+`, the sign-flipped variant.
    PaperLiteral,
}

impl std::str::FromStr for MultiplierMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual-ascent" => Ok(MultiplierMode::DualAscent),
            "paper" | "paper-literal" => Ok(MultiplierMode::PaperLiteral),
            other => Err(invalid("multiplier_mode", format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for MultiplierMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MultiplierMode::DualAscent => "dual-ascent",
            MultiplierMode::PaperLiteral => "paper",
        })
    }
}

/// How the multipliers of each sub-problem are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiplierSolve {
    /// `inner_steps` projected steps per outer iteration.
    Steps,
    /// Solve each constrained sub-problem to its KKT point: the power
    /// multiplier projects the row onto its power ball, and `mu_k`,
    /// `theta_k` are tied so the `(Psi_k, eta_k)` pair is jointly projected
    /// onto the linearised SINR constraint.
    #[default]
    Exact,
}

impl std::str::FromStr for MultiplierSolve {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "steps" => Ok(MultiplierSolve::Steps),
            "exact" => Ok(MultiplierSolve::Exact),
            other => Err(invalid("multiplier_solve", format!("unknown strategy `{other}`"))),
        }
    }
}

impl std::fmt::Display for MultiplierSolve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MultiplierSolve::Steps => "steps",
            MultiplierSolve::Exact => "exact",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Penalty on `eta_k = gamma`. The solver works in units where power and
    /// noise are 1 and uses `rho K^2 / s`, with `s` the single-user SINR
    /// bound of the weakest user.
    pub rho: f64,
    /// Initial penalty on the matrix consensus constraints, applied as
    /// `consensus_weight * s / (N K^2)`.
    pub consensus_weight: f64,
    /// Per-iteration growth factor of the matrix consensus penalty.
    pub consensus_growth: f64,
    /// Per-iteration growth factor of both penalties (1 keeps them fixed).
    pub penalty_growth: f64,
    /// Initial multiplier step size, used by [`MultiplierSolve::Steps`].
    pub step_size: f64,
    /// Divide the step size by `sqrt(r)` at iteration `r`.
    pub step_decay: bool,
    pub inner_steps: usize,
    pub multiplier_mode: MultiplierMode,
    pub multiplier_solve: MultiplierSolve,
    /// Relative change of `gamma` below which the run stops.
    pub tolerance: f64,
    /// Largest relative consensus residual allowed at stop; `f64::INFINITY`
    /// stops on the objective change alone.
    pub residual_tolerance: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rho: 1.2,
            consensus_weight: 0.2,
            consensus_growth: 1.15,
            penalty_growth: 1.0,
            step_size: 0.1,
            step_decay: true,
            inner_steps: 1,
            multiplier_mode: MultiplierMode::DualAscent,
            multiplier_solve: MultiplierSolve::Exact,
            tolerance: 1e-3,
            residual_tolerance: 1e-2,
            max_iters: 200,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(invalid("rho", "must be positive"));
        }
        if !(self.consensus_weight > 0.0) {
            return Err(invalid("consensus_weight", "must be positive"));
        }
        if !(self.consensus_growth >= 1.0) {
            return Err(invalid("consensus_growth", "must be at least 1"));
        }
        if !(self.penalty_growth >= 1.0) {
            return Err(invalid("penalty_growth", "must be at least 1"));
        }
        if !(self.step_size > 0.0) {
            return Err(invalid("step_size", "must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        if !(self.residual_tolerance > 0.0) {
            return Err(invalid("residual_tolerance", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if self.inner_steps == 0 {
            return Err(invalid("inner_steps", "must be at least 1"));
        }
        Ok(())
    }
}
