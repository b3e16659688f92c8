//! Dimension-wise explainable node embeddings.
//!
//! Graph handling and synthetic benchmarks, a disentangling encoder trained
//! with random-walk, overlap and entropy objectives, per-dimension edge
//! explanations, interpretability metrics and downstream evaluation.

pub mod downstream;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod graph;
pub mod mask;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod sampling;
pub mod scalar;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use graph::{Edge, Graph, GroundTruth, NodeId};
pub use matrix::Matrix;
pub use scalar::Scalar;

pub type Matrix32 = matrix::Matrix<f32>;
pub type Matrix64 = matrix::Matrix<f64>;
pub type EncoderParams32 = model::EncoderParams<f32>;
pub type EncoderParams64 = model::EncoderParams<f64>;
pub type Embedding32 = matrix::Matrix<f32>;
