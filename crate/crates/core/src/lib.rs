//! Hyperdimensional-computing classifiers and a deterministic federated
//! training simulator.
//!
//! Data flows through [`pipeline::encode_dataset`] (normalization, random
//! Fourier features, random-projection encoding) into [`fedsim`], which runs
//! either full-width FedAvg or sub-model training followed by refining of
//! randomly chosen positions. [`cost`] gives the matching closed-form
//! computation and traffic counts.

pub mod cost;
pub mod datasets;
pub mod error;
pub mod features;
pub mod fedsim;
pub mod hd_space;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};
pub use fedsim::{
    aggregate, concatenate, run, run_baseline, run_refhdc, sample_positions, EncodedData,
    FederationConfig, Method, RoundRecord, RunOutcome, Stage,
};
pub use hd_space::{cosine_distance, make_basis, HdVector, ProjectionBasis};
pub use model::{Accuracy, ModelCheckpoint, PositionSubset, PrototypeModel};
