//! The goal-constraint predictor: state encoder, temporal context encoder,
//! instruction-conditioned attention, goal-object self-attention and the
//! six-head autoregressive decoder with grammar masks.

pub mod checkpoint;
pub mod config;
pub mod net;
pub mod params;
pub mod rollout;

pub use checkpoint::Checkpoint;
pub use config::{AblationFlags, GoalNetConfig, HistoryMode, ModelDims, PRELU_SLOPE};
pub use net::{
    argmax, history_events, ConstraintPrediction, DatumInputs, GoalEntry, HeadCache, HistEvent,
    StepCache, StepTargets, TemporalContext,
};
pub use params::{GoalNet, GoalNetParams};
pub use rollout::{InferRollout, RolloutTrace, StepTrace, MAX_ROLLOUT_STEPS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("scene has {count} objects, model capacity is {max}")]
    OverCapacity { count: usize, max: usize },
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
    #[error(transparent)]
    Lang(#[from] crate::lang::LangError),
}
