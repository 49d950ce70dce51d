//! Configuration, persistence and the cached end-to-end pipeline.

mod config;
pub mod io;
mod pipeline;
mod runs;

pub use config::{
    AlgoKind, AlgorithmSection, ClusteringSection, ConfigError, DesignSpaceSection,
    ExperimentConfig, LandscapeSection, MapElitesSection, MetricsSection, RandomSection,
    TournamentSection, DESK_PRESET,
};
pub use pipeline::{
    design_space, fit_clusters, generate_designs, hash_parts, pipeline, train_embedding, Manifest,
    PipelineReport, StageRecord, MANIFEST,
};
pub use runs::{
    collect_run_metrics, execute_run, metric_fitness, replay_metrics, run_name, run_seed,
    scored_population, write_metrics_csv, EliteRecord, FinalRecord, RunManifest, RunOutcome,
    WorldParts,
};

use crate::clustering::ClusterError;
use crate::design_space::SerialError;
use crate::embedding::VaeError;
use crate::evaluation::{LandscapeError, NoMorphologiesServed};
use crate::metrics::MetricsError;
use crate::search::SearchError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: missing field `{field}`")]
    MissingField { path: String, field: String },
    #[error("hash mismatch: {file} does not match the manifest")]
    HashMismatch { file: String },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        source: Box<HarnessError>,
    },
    #[error("metrics replayed from {run} differ from the stored ones")]
    MetricsMismatch { run: String },
    #[error(transparent)]
    Serial(#[from] SerialError),
    #[error(transparent)]
    Vae(#[from] VaeError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Flops(#[from] NoMorphologiesServed),
}

/// Caps rayon's global pool at `QDC_WORKERS` threads when it is set.
pub fn configure_workers() {
    if let Some(n) = std::env::var("QDC_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}
