//! Clustered quality-diversity search over a synthetic tree-structured
//! morphology space.
//!
//! The numeric modules are generic over [`Scalar`]; the aliases below fix
//! them to `f64`, which is what the pipeline and the CLI use.

pub mod clustering;
pub mod design_space;
pub mod embedding;
pub mod evaluation;
pub mod harness;
pub mod metrics;
pub mod scalar;
pub mod search;
pub mod seed;

pub use scalar::Scalar;

pub type VaeModelF64 = embedding::VaeModel<f64>;
pub type ClusterModelF64 = clustering::ClusterModel<f64>;
pub type NicheLandscapeF64 = evaluation::NicheLandscape<f64>;
pub type DesignF64 = search::Design<f64>;
pub type LokiRunF64 = search::LokiRun<f64>;
pub type MapElitesRunF64 = search::MapElitesRun<f64>;
pub type TournamentRunF64 = search::TournamentRun<f64>;
