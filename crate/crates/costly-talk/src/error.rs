//! Error types shared across the crate.

use thiserror::Error;

/// A named violation of a game-environment invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("non-monotone payoff for {0}: du_beta must be >= 0")]
    NonMonotonePayoff(String),
    #[error("bad receiver normalization: {0}")]
    BadReceiverNormalization(String),
    #[error("sender {0} has zero bias: delta_u_j(0) = 0")]
    ZeroBiasSender(usize),
    #[error("sender {0} never conflicts with the receiver")]
    NoConflictSender(usize),
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("bad prior: {0}")]
    BadPrior(String),
    #[error("bad cost spec for sender {0}: {1}")]
    BadCost(usize, String),
    #[error("bad protocol: {0}")]
    BadProtocol(String),
}

/// Errors from evaluating operations on a validated game.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("state {0} is not on the state grid")]
    OffGridState(f64),
    #[error("report {0} is not on the report grid")]
    OffGridReport(f64),
    #[error("unknown sender id {0}")]
    UnknownSender(usize),
    #[error("reach queried on the wrong side for sender {0}")]
    WrongBiasSide(usize),
    #[error("bracket expansion failed for sender {sender} at state {state}")]
    BracketFailure { sender: usize, state: f64 },
    #[error("posterior has no mass")]
    DegeneratePosterior,
    #[error("strategy table is incomplete: {0}")]
    IncompleteStrategy(String),
    #[error("grid misalignment: {0}")]
    GridMisalignment(String),
    #[error("construction requires a different bias configuration: {0}")]
    WrongBiasConfiguration(String),
    #[error("construction requires a different timing: {0}")]
    WrongTiming(String),
    #[error("coalition of size {0} exceeds the search guard (max 3)")]
    CoalitionTooLarge(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
}
