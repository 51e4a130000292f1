//! Multi-stage cascading-failure environment.
//!
//! One RL step is one stage: the agent picks a scale for every branch-flow
//! limit inside the corrective DC-OPF, then the grid runs through its
//! generations (power flow, relay trips on overload, redispatch) until it
//! settles or collapses. The next stage's disturbance is applied before the
//! successor state is observed.

mod config;
mod env;
mod features;
mod log;

use thiserror::Error;

use crate::dc_opf::OpfError;
use crate::power_flow::PowerFlowError;

pub use config::{AttackSpec, EnvConfig, OpfFrequency, TripRule};
pub use env::{CascadeEnv, StepOutcome};
pub use features::{feature_len, featurize};
pub use log::{
    CollapseReason, EpisodeLog, EpisodeResult, GenerationRecord, StageLog, StageOpf, Transition,
};

/// Candidate scale factors applied to branch-flow limits.
pub const ACTION_VALUES: [f64; 10] = [0.80, 0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15, 1.20, 1.25];

pub fn action_value(index: usize) -> Result<f64, EnvError> {
    ACTION_VALUES
        .get(index)
        .copied()
        .ok_or(EnvError::InvalidAction(index))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("episode already terminated; call reset")]
    Terminated,
    #[error("step called before reset")]
    NotReset,
    #[error("action index {0} outside 0..10")]
    InvalidAction(usize),
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("invalid network: {0}")]
    Network(String),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Opf(#[from] OpfError),
}
