//! Symbolic environment model: objects, states, properties, relations,
//! action semantics, deterministic transition and goal checking.

pub mod ops;
pub mod schema;
pub mod state;

pub use ops::{
    adjacency_vector, apply_action, check_preconditions, enumerate_groundings,
    enumerate_groundings_over, feasible_fillers, first_violation, goal_check, ground_action,
    relation_diff, GroundedAction, Slot,
};
pub use schema::{ActionSchema, DomainSchema, RelationDef, SchemaSet, ROBOT_CLASS};
pub use state::{
    GoalSpec, ObjectInstance, ObjectJson, Predicate, Universe, WorldState, WorldStateJson,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("unknown object id {id}")]
    UnknownObject { id: String },
    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("illegal action {action}: precondition {violated} does not hold")]
    IllegalAction { action: String, violated: String },
    #[error("states belong to different object universes")]
    UniverseMismatch,
    #[error("scene has {count} objects, schema capacity is {max}")]
    OverCapacity { count: usize, max: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

impl DomainError {
    pub(crate) fn unknown(kind: &'static str, name: &str) -> Self {
        DomainError::UnknownName {
            kind,
            name: name.to_string(),
        }
    }
}
