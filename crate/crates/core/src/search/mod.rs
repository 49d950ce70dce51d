//! The optimizers: LOKI's clustered elite pools with a shared evaluator,
//! MAP-Elites, a global tournament, and random search.

mod config;
mod design;
mod loki;
mod map_elites;
mod tournament;

pub use config::{LokiConfig, MapElitesConfig, RandomConfig, Replacement, TournamentConfig};
pub use design::{
    Classifier, Design, DesignCatalog, DesignSource, RandomDesigns, Variation, World,
};
pub use loki::{
    merge, run_loki, run_loki_cluster, ClusterRun, ElitePool, IterationRecord, LokiRun, PoolMember,
    PoolUpdate, RunHistory,
};
pub use map_elites::{run_map_elites, Elite, MapElitesArchive, MapElitesRun};
pub use tournament::{
    run_random, run_tournament, tournament_select, Individual, LineageRecord, TournamentRun,
};

use serde::{Deserialize, Serialize};

use crate::evaluation::BudgetLedger;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("invalid search configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("cluster {cluster} yielded too few distinct designs to fill its pool")]
    ClusterStarvation { cluster: usize },
}

/// Per-generation summary shared by the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub trained: usize,
    pub best: f64,
    pub mean: f64,
    pub interactions: u64,
}

impl GenerationRecord {
    fn of<F: Scalar>(
        generation: usize,
        trained: usize,
        fitness: impl Iterator<Item = F>,
        ledger: &BudgetLedger,
    ) -> Self {
        let (mut n, mut sum, mut best) = (0usize, 0.0, f64::NEG_INFINITY);
        for f in fitness {
            let f = f.to_f64_lossy();
            n += 1;
            sum += f;
            best = best.max(f);
        }
        Self {
            generation,
            trained,
            best,
            mean: if n == 0 { 0.0 } else { sum / n as f64 },
            interactions: ledger.interactions,
        }
    }
}
