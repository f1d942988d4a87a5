//! Costly-signaling committee games on finite grids: reach solvers,
//! equilibrium construction and verification, coalition analysis, and a
//! scenario runner.

pub mod coalition;
pub mod error;
pub mod game;
pub mod grid;
pub mod protocol;
pub mod reach;
pub mod scenario;
pub mod verify;

pub use error::{EvalError, ValidationError};
pub use game::{Action, Bias, GameInstance, Player};
pub use grid::{Grid, ReportGrid, StateGrid};
pub use protocol::{DecisionRule, ProtocolSpec, StrategyProfile, Timing};
