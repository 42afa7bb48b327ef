use thiserror::Error;

use crate::grid::{Action, Cell};

pub type Result<T, E = PlanError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("censored stencil at {cell} for action {action} has no remaining mass")]
    KernelDegenerate { cell: Cell, action: Action },

    #[error("forward flow carries no mass")]
    DeadFlow,

    #[error("invalid goal: {0}")]
    InvalidGoal(String),

    #[error("goal unreachable within {t_max} time slices")]
    Unreachable { t_max: usize },

    #[error("no feasible path (posterior vanished at t = {t})")]
    NoFeasiblePath { t: usize },

    #[error("tensor shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("oracle refused: {0}")]
    OracleGuard(String),
}
