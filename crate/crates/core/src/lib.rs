//! Anomaly detection on discrete-time dynamic knowledge graphs of
//! microservice platforms.

pub mod ensemble;
pub mod eval;
pub mod features;
pub mod graph;
pub mod labels;
pub mod matrix;
pub mod models;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod ttl;

pub use matrix::Matrix;
pub use scalar::Scalar;

/// Double-precision instantiations used by the command line and benchmarks.
pub type Graph = graph::DynamicKnowledgeGraph<f64>;
pub type Dataset = features::FeatureDataset<f64>;
pub type Model = models::AnyModel<f64>;
pub type ModelCheckpoint = models::Checkpoint<f64>;
