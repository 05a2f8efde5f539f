//! Goal-predicate inference for robot instruction following.
//!
//! Given a symbolic world state and a natural-language instruction, a neural
//! predictor infers conjunctive goal constraints (positive and negative
//! predicate sets) step by step; a symbolic planner turns each pair into an
//! executable action sequence. The crate also carries the training pipeline
//! over demonstration data and the four goal-reaching evaluation metrics.

pub mod data;
pub mod domain;
pub mod fixtures;
pub mod lang;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod planner;
pub mod rng;
