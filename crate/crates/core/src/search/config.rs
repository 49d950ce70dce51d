use serde::{Deserialize, Serialize};

use crate::design_space::MutationParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Replacement {
    /// Swap the worst `n_filter` members for the best `n_filter` candidates.
    #[default]
    Unconditional,
    /// Only swap a candidate in when it beats the current worst member.
    Conditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LokiConfig {
    #[serde(default = "d_clusters")]
    pub n_clusters: usize,
    #[serde(default = "d_iter")]
    pub n_iter: usize,
    #[serde(default = "d_fdiff")]
    pub f_diff: usize,
    /// `N_w`.
    #[serde(default = "d_pool")]
    pub pool_size: usize,
    #[serde(default = "d_sample")]
    pub n_sample: usize,
    #[serde(default = "d_filter")]
    pub n_filter: usize,
    #[serde(default = "d_budget")]
    pub per_cluster_budget: u64,
    #[serde(default = "d_leval")]
    pub l_eval: u64,
    #[serde(default = "d_ltrain")]
    pub l_train: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub replacement: Replacement,
    /// Draws allowed per in-cluster candidate before giving up.
    #[serde(default = "d_cap")]
    pub attempt_cap: usize,
    /// `ρ_g` in latent units; `inf` disables the distance falloff.
    #[serde(default = "d_radius")]
    pub generalization_radius: f64,
}

fn d_clusters() -> usize {
    40
}
fn d_iter() -> usize {
    1220
}
fn d_fdiff() -> usize {
    2
}
fn d_pool() -> usize {
    20
}
fn d_sample() -> usize {
    128
}
fn d_filter() -> usize {
    2
}
fn d_budget() -> u64 {
    100_000_000
}
fn d_leval() -> u64 {
    200
}
fn d_ltrain() -> u64 {
    1000
}
fn d_cap() -> usize {
    1000
}
fn d_radius() -> f64 {
    1.0
}

impl Default for LokiConfig {
    fn default() -> Self {
        Self {
            n_clusters: d_clusters(),
            n_iter: d_iter(),
            f_diff: d_fdiff(),
            pool_size: d_pool(),
            n_sample: d_sample(),
            n_filter: d_filter(),
            per_cluster_budget: d_budget(),
            l_eval: d_leval(),
            l_train: d_ltrain(),
            seed: 0,
            replacement: Replacement::default(),
            attempt_cap: d_cap(),
            generalization_radius: d_radius(),
        }
    }
}

impl LokiConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("n_clusters", self.n_clusters),
            ("n_iter", self.n_iter),
            ("f_diff", self.f_diff),
            ("pool_size", self.pool_size),
            ("attempt_cap", self.attempt_cap),
        ];
        for (name, v) in positive {
            if v == 0 {
                out.push(format!("{name} must be at least 1"));
            }
        }
        if self.l_eval == 0 {
            out.push("l_eval must be at least 1".into());
        }
        if self.n_filter > self.pool_size {
            out.push(format!(
                "n_filter ({}) cannot exceed pool_size ({})",
                self.n_filter, self.pool_size
            ));
        }
        if !(self.generalization_radius > 0.0) {
            out.push(format!(
                "generalization_radius must be positive, got {}",
                self.generalization_radius
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapElitesConfig {
    /// Total designs trained, initial batch included.
    pub n_train: usize,
    /// `M`: initial batch and designs per generation.
    #[serde(default = "d_batch")]
    pub batch: usize,
    /// `S`: steps each design trains for.
    #[serde(default = "d_steps")]
    pub train_steps: u64,
    #[serde(default = "d_elites")]
    pub elites_per_cell: usize,
    #[serde(default)]
    pub mutation: MutationParams,
}

fn d_batch() -> usize {
    20
}
fn d_steps() -> u64 {
    5_000_000
}
fn d_elites() -> usize {
    3
}

impl MapElitesConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_train == 0 {
            out.push("n_train must be at least 1".into());
        }
        if self.batch == 0 {
            out.push("batch must be at least 1".into());
        }
        if self.elites_per_cell == 0 {
            out.push("elites_per_cell must be at least 1".into());
        }
        out.extend(self.mutation.validate().err());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TournamentConfig {
    pub population: usize,
    pub generations: usize,
    /// Children produced and trained per generation.
    #[serde(default = "d_offspring")]
    pub offspring: usize,
    #[serde(default = "d_tsize")]
    pub tournament_size: usize,
    #[serde(default = "d_steps")]
    pub train_steps: u64,
    #[serde(default)]
    pub mutation: MutationParams,
}

fn d_offspring() -> usize {
    8
}
fn d_tsize() -> usize {
    4
}

impl TournamentConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.population == 0 {
            out.push("population must be at least 1".into());
        }
        if self.tournament_size == 0 || self.tournament_size > self.population {
            out.push(format!(
                "tournament_size must be in 1..={}, got {}",
                self.population, self.tournament_size
            ));
        }
        out.extend(self.mutation.validate().err());
        out
    }

    pub fn trained_designs(&self) -> u64 {
        (self.population + self.generations * self.offspring) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomConfig {
    pub count: usize,
    #[serde(default = "d_steps")]
    pub train_steps: u64,
}

impl RandomConfig {
    pub fn validate(&self) -> Vec<String> {
        if self.count == 0 {
            vec!["count must be at least 1".into()]
        } else {
            Vec::new()
        }
    }
}
