use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design_space::{DesignSpaceConfig, LimbCountDistribution, MutationParams};
use crate::embedding::VaeConfig;
use crate::evaluation::{total_interactions, DeceptiveParams, LearningCurveModel};
use crate::search::{LokiConfig, MapElitesConfig, RandomConfig, TournamentConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoKind {
    Loki,
    MapElites,
    Tournament,
    Random,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 4] = [Self::Loki, Self::MapElites, Self::Tournament, Self::Random];

    pub fn name(self) -> &'static str {
        match self {
            Self::Loki => "loki",
            Self::MapElites => "map-elites",
            Self::Tournament => "tournament",
            Self::Random => "random",
        }
    }
}

impl std::fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AlgoKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!("unknown algorithm `{s}` (expected loki, map-elites, tournament or random)")
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpaceSection {
    /// Designs generated for embedding training and clustering.
    #[serde(default = "d_designs")]
    pub designs: usize,
    #[serde(default = "d_lmax")]
    pub l_max: usize,
    #[serde(default = "d_limbs")]
    pub limb_count: LimbCountDistribution,
}

fn d_designs() -> usize {
    20_000
}
fn d_lmax() -> usize {
    DesignSpaceConfig::default().l_max
}
fn d_limbs() -> LimbCountDistribution {
    DesignSpaceConfig::default().limb_count
}

impl Default for DesignSpaceSection {
    fn default() -> Self {
        Self {
            designs: d_designs(),
            l_max: d_lmax(),
            limb_count: d_limbs(),
        }
    }
}

impl DesignSpaceSection {
    pub fn space_config(&self) -> DesignSpaceConfig {
        DesignSpaceConfig {
            l_max: self.l_max,
            limb_count: self.limb_count.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringSection {
    /// `N_c`, clusters in the latent space.
    #[serde(default = "d_k")]
    pub k: usize,
    /// Cells of the raw-parameter classifier used by MAP-Elites; defaults to `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_k: Option<usize>,
    #[serde(default = "d_iters")]
    pub max_iters: usize,
}

fn d_k() -> usize {
    40
}
fn d_iters() -> usize {
    crate::clustering::DEFAULT_MAX_ITERS
}

impl Default for ClusteringSection {
    fn default() -> Self {
        Self {
            k: d_k(),
            raw_k: None,
            max_iters: d_iters(),
        }
    }
}

impl ClusteringSection {
    pub fn raw_k(&self) -> usize {
        self.raw_k.unwrap_or(self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSection {
    #[serde(default)]
    pub deceptive: DeceptiveParams,
    #[serde(default)]
    pub curve: LearningCurveModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapElitesSection {
    #[serde(default = "d_me_batch")]
    pub batch: usize,
    #[serde(default = "d_steps")]
    pub train_steps: u64,
    #[serde(default = "d_elites")]
    pub elites_per_cell: usize,
    #[serde(default)]
    pub mutation: MutationParams,
}

fn d_me_batch() -> usize {
    20
}
fn d_steps() -> u64 {
    5_000_000
}
fn d_elites() -> usize {
    3
}

impl Default for MapElitesSection {
    fn default() -> Self {
        Self {
            batch: d_me_batch(),
            train_steps: d_steps(),
            elites_per_cell: d_elites(),
            mutation: MutationParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TournamentSection {
    #[serde(default = "d_population")]
    pub population: usize,
    #[serde(default = "d_offspring")]
    pub offspring: usize,
    #[serde(default = "d_tsize")]
    pub tournament_size: usize,
    #[serde(default = "d_steps")]
    pub train_steps: u64,
    #[serde(default)]
    pub mutation: MutationParams,
}

fn d_population() -> usize {
    100
}
fn d_offspring() -> usize {
    20
}
fn d_tsize() -> usize {
    4
}

impl Default for TournamentSection {
    fn default() -> Self {
        Self {
            population: d_population(),
            offspring: d_offspring(),
            tournament_size: d_tsize(),
            train_steps: d_steps(),
            mutation: MutationParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSection {
    #[serde(default = "d_steps")]
    pub train_steps: u64,
}

impl Default for RandomSection {
    fn default() -> Self {
        Self {
            train_steps: d_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    #[serde(default = "d_kinds")]
    pub kinds: Vec<AlgoKind>,
    /// Interactions every algorithm gets; defaults to a full LOKI run's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_budget: Option<u64>,
    #[serde(default)]
    pub loki: LokiConfig,
    #[serde(default, rename = "map-elites")]
    pub map_elites: MapElitesSection,
    #[serde(default)]
    pub tournament: TournamentSection,
    #[serde(default)]
    pub random: RandomSection,
}

fn d_kinds() -> Vec<AlgoKind> {
    AlgoKind::ALL.to_vec()
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        Self {
            kinds: d_kinds(),
            shared_budget: None,
            loki: LokiConfig::default(),
            map_elites: MapElitesSection::default(),
            tournament: TournamentSection::default(),
            random: RandomSection::default(),
        }
    }
}

fn ratio(budget: u64, steps: u64) -> usize {
    ((budget as f64) / (steps as f64)).round() as usize
}

impl AlgorithmSection {
    pub fn shared_budget(&self) -> u64 {
        self.shared_budget
            .unwrap_or_else(|| total_interactions(&self.loki))
    }

    /// Loki settings for one run.
    pub fn loki_for(&self, seed: u64) -> LokiConfig {
        LokiConfig {
            seed,
            ..self.loki.clone()
        }
    }

    pub fn map_elites_config(&self) -> MapElitesConfig {
        let s = &self.map_elites;
        MapElitesConfig {
            n_train: ratio(self.shared_budget(), s.train_steps),
            batch: s.batch,
            train_steps: s.train_steps,
            elites_per_cell: s.elites_per_cell,
            mutation: s.mutation.clone(),
        }
    }

    pub fn tournament_config(&self) -> TournamentConfig {
        let s = &self.tournament;
        let designs = ratio(self.shared_budget(), s.train_steps);
        let generations = if s.offspring == 0 {
            0
        } else {
            ((designs.saturating_sub(s.population)) as f64 / s.offspring as f64).round() as usize
        };
        TournamentConfig {
            population: s.population,
            generations,
            offspring: s.offspring,
            tournament_size: s.tournament_size,
            train_steps: s.train_steps,
            mutation: s.mutation.clone(),
        }
    }

    pub fn random_config(&self) -> RandomConfig {
        RandomConfig {
            count: ratio(self.shared_budget(), self.random.train_steps),
            train_steps: self.random.train_steps,
        }
    }

    /// Closed-form interactions of each listed algorithm.
    pub fn planned_interactions(&self, kind: AlgoKind) -> u64 {
        match kind {
            AlgoKind::Loki => total_interactions(&self.loki),
            AlgoKind::MapElites => {
                let c = self.map_elites_config();
                c.n_train as u64 * c.train_steps
            }
            AlgoKind::Tournament => {
                let c = self.tournament_config();
                c.trained_designs() * c.train_steps
            }
            AlgoKind::Random => {
                let c = self.random_config();
                c.count as u64 * c.train_steps
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    /// Designs taken from each run's final population.
    #[serde(default = "d_final")]
    pub population: usize,
    #[serde(default = "d_eval_seeds")]
    pub eval_seeds: usize,
    /// Training steps at which reported fitness is read off the curve.
    #[serde(default = "d_eval_steps")]
    pub eval_steps: u64,
    #[serde(default = "d_knn")]
    pub k_neighbors: usize,
}

fn d_final() -> usize {
    100
}
fn d_eval_seeds() -> usize {
    5
}
fn d_eval_steps() -> u64 {
    1_000_000
}
fn d_knn() -> usize {
    5
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            population: d_final(),
            eval_seeds: d_eval_seeds(),
            eval_steps: d_eval_steps(),
            k_neighbors: d_knn(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed of the world stages: designs, embedding, clusters, landscape.
    #[serde(default)]
    pub root_seed: u64,
    /// One search run per algorithm per seed.
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub design_space: DesignSpaceSection,
    #[serde(default)]
    pub vae: VaeConfig,
    #[serde(default)]
    pub clustering: ClusteringSection,
    #[serde(default)]
    pub landscape: LandscapeSection,
    #[serde(default)]
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

const REQUIRED: &[&str] = &["seeds"];

/// The shipped desk-scale preset.
pub const DESK_PRESET: &str = include_str!("../../../../configs/desk.toml");

fn locate(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, column)
}

fn parse_error(text: &str, e: toml::de::Error) -> ConfigError {
    let (line, column) = e.span().map_or((0, 0), |s| locate(text, s.start));
    ConfigError::Parse {
        line,
        column,
        message: e.message().trim().to_string(),
    }
}

impl ExperimentConfig {
    /// Default values everywhere, with the given search seeds.
    pub fn with_seeds(seeds: Vec<u64>) -> Self {
        Self {
            root_seed: 0,
            seeds,
            design_space: DesignSpaceSection::default(),
            vae: VaeConfig::default(),
            clustering: ClusteringSection::default(),
            landscape: LandscapeSection::default(),
            algorithm: AlgorithmSection::default(),
            metrics: MetricsSection::default(),
        }
    }

    pub fn desk() -> Self {
        Self::parse(DESK_PRESET).expect("the desk preset is valid")
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e| parse_error(text, e))?;
        let missing: Vec<String> = REQUIRED
            .iter()
            .filter(|k| !table.contains_key(**k))
            .map(|k| format!("missing required key `{k}`"))
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError::Validation(missing));
        }
        let cfg: Self = toml::from_str(text).map_err(|e| parse_error(text, e))?;
        let problems = cfg.validate();
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Validation(problems))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configs always serialize")
    }

    /// Every violation, each prefixed with its section.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut section = |name: &str, problems: Vec<String>| {
            out.extend(problems.into_iter().map(|p| format!("{name}: {p}")));
        };
        section(
            "seeds",
            if self.seeds.is_empty() {
                vec!["at least one seed is required".into()]
            } else {
                vec![]
            },
        );
        let ds = &self.design_space;
        let mut v = self
            .design_space
            .space_config()
            .validate()
            .err()
            .into_iter()
            .collect::<Vec<_>>();
        if ds.designs < 2 {
            v.push(format!("designs must be at least 2, got {}", ds.designs));
        }
        section("design_space", v);
        let columns =
            (ds.l_max + 1) * crate::design_space::AttributeSchema::default().total_columns();
        let mut v: Vec<String> = self
            .vae
            .validate(columns)
            .into_iter()
            .map(|p| p.trim_start_matches("vae.").to_string())
            .collect();
        if self.vae.batch_size > ds.designs {
            v.push(format!(
                "batch_size ({}) exceeds the {} generated designs",
                self.vae.batch_size, ds.designs
            ));
        }
        section("vae", v);
        let c = &self.clustering;
        let mut v = Vec::new();
        if c.k == 0 || c.raw_k() == 0 {
            v.push("k and raw_k must be at least 1".into());
        }
        if c.k.max(c.raw_k()) > ds.designs {
            v.push(format!(
                "cannot form {} clusters from {} designs",
                c.k.max(c.raw_k()),
                ds.designs
            ));
        }
        if c.max_iters == 0 {
            v.push("max_iters must be at least 1".into());
        }
        section("clustering", v);
        let l = &self.landscape;
        let mut v = l.curve.validate();
        if l.deceptive.d == 0 {
            v.push("deceptive.d must be at least 1".into());
        }
        if !(l.deceptive.low_width > 0.0 && l.deceptive.high_width > 0.0) {
            v.push("niche widths must be positive".into());
        }
        if !(l.deceptive.low_height > 0.0 && l.deceptive.high_height > 0.0) {
            v.push("niche heights must be positive".into());
        }
        section("landscape", v);
        let a = &self.algorithm;
        let mut v = Vec::new();
        if a.kinds.is_empty() {
            v.push("kinds must list at least one algorithm".into());
        }
        let mut seen = a.kinds.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != a.kinds.len() {
            v.push("kinds lists an algorithm twice".into());
        }
        v.extend(a.loki.validate().into_iter().map(|p| format!("loki.{p}")));
        if a.loki.n_clusters != c.k {
            v.push(format!(
                "loki.n_clusters ({}) must equal clustering.k ({})",
                a.loki.n_clusters, c.k
            ));
        }
        if a.shared_budget() == 0 {
            v.push("the shared budget is zero".into());
        }
        if a.kinds.contains(&AlgoKind::MapElites) {
            if a.map_elites.train_steps == 0 {
                v.push("map-elites.train_steps must be at least 1".into());
            } else {
                v.extend(
                    a.map_elites_config()
                        .validate()
                        .into_iter()
                        .map(|p| format!("map-elites.{p}")),
                );
            }
        }
        if a.kinds.contains(&AlgoKind::Tournament) {
            if a.tournament.train_steps == 0 || a.tournament.offspring == 0 {
                v.push("tournament.train_steps and tournament.offspring must be at least 1".into());
            } else {
                v.extend(
                    a.tournament_config()
                        .validate()
                        .into_iter()
                        .map(|p| format!("tournament.{p}")),
                );
            }
        }
        if a.kinds.contains(&AlgoKind::Random) {
            if a.random.train_steps == 0 {
                v.push("random.train_steps must be at least 1".into());
            } else {
                v.extend(
                    a.random_config()
                        .validate()
                        .into_iter()
                        .map(|p| format!("random.{p}")),
                );
            }
        }
        if v.is_empty() && a.shared_budget() > 0 {
            let budget = a.shared_budget() as f64;
            for &k in &a.kinds {
                let planned = a.planned_interactions(k) as f64;
                if (planned / budget - 1.0).abs() > 0.01 {
                    v.push(format!(
                        "{k} would spend {planned} interactions, more than 1% off the shared budget {budget}"
                    ));
                }
            }
        }
        section("algorithm", v);
        let m = &self.metrics;
        let mut v = Vec::new();
        if m.population < 2 {
            v.push("population must be at least 2".into());
        }
        if m.eval_seeds == 0 {
            v.push("eval_seeds must be at least 1".into());
        }
        if m.k_neighbors == 0 {
            v.push("k_neighbors must be at least 1".into());
        }
        section("metrics", v);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_full_scale_defaults() {
        let cfg = ExperimentConfig::parse("seeds = [1]").unwrap();
        let l = &cfg.algorithm.loki;
        assert_eq!(
            (
                l.n_iter,
                l.f_diff,
                l.pool_size,
                l.n_filter,
                l.n_sample,
                l.l_eval
            ),
            (1220, 2, 20, 2, 128, 200)
        );
        assert_eq!(l.per_cluster_budget, 100_000_000);
        assert_eq!(cfg.clustering.k, 40);
        assert_eq!(cfg, ExperimentConfig::with_seeds(vec![1]));
    }

    #[test]
    fn missing_seeds_is_named() {
        match ExperimentConfig::parse("root_seed = 3") {
            Err(ConfigError::Validation(v)) => assert!(v[0].contains("`seeds`"), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_report_their_position() {
        let text = "seeds = [0]\n\n[clustering]\nk = 40\nkk = 3\n";
        match ExperimentConfig::parse(text) {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("kk"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::parse("seeds = [0\n") {
            Err(ConfigError::Parse { line, .. }) => assert!(line >= 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "seeds = []\n[clustering]\nk = 7\n[metrics]\neval_seeds = 0\n";
        match ExperimentConfig::parse(text) {
            Err(ConfigError::Validation(v)) => {
                assert!(v.iter().any(|p| p.starts_with("seeds")));
                assert!(v.iter().any(|p| p.contains("n_clusters")));
                assert!(v.iter().any(|p| p.contains("eval_seeds")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn write_then_load_round_trips() {
        for cfg in [
            ExperimentConfig::with_seeds(vec![0, 5]),
            ExperimentConfig::desk(),
        ] {
            let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
            assert_eq!(again, cfg);
        }
        let mut cfg = ExperimentConfig::desk();
        cfg.algorithm.loki.generalization_radius = f64::INFINITY;
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn baseline_budgets_match_the_shared_budget() {
        let cfg = ExperimentConfig::desk();
        let b = cfg.algorithm.shared_budget() as f64;
        for k in AlgoKind::ALL {
            let got = cfg.algorithm.planned_interactions(k) as f64;
            assert!((got / b - 1.0).abs() <= 0.01, "{k}: {got} vs {b}");
        }
    }
}
