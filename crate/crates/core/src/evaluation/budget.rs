use serde::{Deserialize, Serialize};

use crate::search::LokiConfig;

/// Running count of simulated environment steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub interactions: u64,
    pub evaluations: u64,
    pub flops_estimate: f64,
}

impl BudgetLedger {
    pub fn charge_training(&mut self, steps: u64) {
        self.interactions += steps;
    }

    pub fn charge_evaluation(&mut self, steps: u64) {
        self.interactions += steps;
        self.evaluations += 1;
    }

    pub fn merge(&mut self, other: &BudgetLedger) {
        self.interactions += other.interactions;
        self.evaluations += other.evaluations;
        self.flops_estimate += other.flops_estimate;
    }

    pub fn sum<'a>(ledgers: impl IntoIterator<Item = &'a BudgetLedger>) -> BudgetLedger {
        let mut total = BudgetLedger::default();
        for l in ledgers {
            total.merge(l);
        }
        total
    }
}

/// Steps the pool trains for at iteration `i` (1-based), spreading the
/// per-cluster budget so the iterations sum to it exactly.
pub fn steps_for_iteration(per_cluster_budget: u64, n_iter: usize, i: usize) -> u64 {
    let b = per_cluster_budget as u128;
    let n = n_iter as u128;
    let at = |j: usize| (b * j as u128 / n) as u64;
    at(i) - at(i - 1)
}

/// Number of iterations that run a pool update.
pub fn update_count(cfg: &LokiConfig) -> u64 {
    (cfg.n_iter / cfg.f_diff) as u64
}

/// Environment steps of a complete LOKI run.
pub fn total_interactions(cfg: &LokiConfig) -> u64 {
    let per_cluster = cfg.per_cluster_budget + update_count(cfg) * cfg.n_sample as u64 * cfg.l_eval;
    cfg.n_clusters as u64 * per_cluster
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchedMorphologies {
    /// Candidates drawn and scored per cluster.
    pub sampled_per_cluster: u64,
    /// Distinct designs a cluster can have seen: sampled plus the initial pool.
    pub per_cluster: u64,
    pub total_sampled: u64,
    pub total: u64,
}

pub fn searched_morphologies(cfg: &LokiConfig) -> SearchedMorphologies {
    let sampled = update_count(cfg) * cfg.n_sample as u64;
    let per_cluster = sampled + cfg.pool_size as u64;
    let n = cfg.n_clusters as u64;
    SearchedMorphologies {
        sampled_per_cluster: sampled,
        per_cluster,
        total_sampled: sampled * n,
        total: per_cluster * n,
    }
}

/// Training cost of a policy and how many designs it serves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopsModel {
    pub flops_per_forward: f64,
    pub batch: f64,
    pub ppo_epochs: f64,
    pub iters: f64,
    pub morphologies_served: f64,
}

impl FlopsModel {
    /// Per-design MLP controller.
    pub fn mlp() -> Self {
        Self {
            flops_per_forward: 31.9e3,
            batch: 512.0,
            ppo_epochs: 4.0,
            iters: 1220.0,
            morphologies_served: 1.0,
        }
    }

    /// Shared transformer controller serving every design a cluster samples.
    pub fn transformer() -> Self {
        Self {
            flops_per_forward: 79.5e6,
            batch: 5120.0,
            ppo_epochs: 8.0,
            iters: 1220.0,
            morphologies_served: 78_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("a policy must serve at least one morphology, got {0}")]
pub struct NoMorphologiesServed(pub f64);

/// Training FLOPs amortised per searched design: `2·fwd·batch·epochs·iters / served`.
pub fn flops_per_morphology(m: &FlopsModel) -> Result<f64, NoMorphologiesServed> {
    if !(m.morphologies_served >= 1.0) {
        return Err(NoMorphologiesServed(m.morphologies_served));
    }
    Ok(2.0 * m.flops_per_forward * m.batch * m.ppo_epochs * m.iters / m.morphologies_served)
}
