//! Demonstration ingestion, supervision extraction, augmentation, synthetic
//! data generation and the training loop.

pub mod augment;
pub mod dataset;
pub mod synth;
pub mod train;

pub use augment::augment;
pub use dataset::{
    extract_supervision, load_dataset, save_dataset, save_dataset_with_provenance,
    split_dataset, Demonstration, Split, SplitIndices,
};
pub use synth::{random_scene, synth_generate, synth_generate_split};
pub use train::{train, DatumLossFixture, EpochRecord, TrainConfig, TrainOutcome, Trainer};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset parse error: {0}")]
    Parse(String),
    #[error("demo {id}: {message}")]
    Malformed { id: String, message: String },
    #[error("demo {id}, step {step}: {message}")]
    Transition {
        id: String,
        step: usize,
        message: String,
    },
    #[error("test initial states overlap training: {ids:?}")]
    SplitLeakage { ids: Vec<String> },
    #[error("training split is empty")]
    EmptyTrainSet,
    #[error("generation failed at datum {index}: {message}")]
    Generation { index: usize, message: String },
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
