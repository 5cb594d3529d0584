//! Particle-based variational inference for neural-network ensembles.
//!
//! Members are ReLU MLP feature extractors; inference can run on their
//! weights, on their output logits, or on their features with a shared linear
//! classifier. Interaction between members is a kernel-density repulsion,
//! which in feature space is evaluated inside the dominant subspace of the
//! likelihood gradients.

pub mod checkpoint;
pub mod data;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod model;
pub mod metrics;
pub mod parallel;
pub mod priors;
pub mod repulsion;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
