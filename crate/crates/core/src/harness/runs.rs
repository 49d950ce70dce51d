use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{AlgoKind, ExperimentConfig};
use super::io::{read_json, read_jsonl, write_csv, write_json, write_jsonl};
use super::HarnessError;
use crate::clustering::ClusterModel;
use crate::design_space::{AttributeSchema, DesignSpace, MorphologyGenome};
use crate::embedding::{RawEmbedder, VaeModel};
use crate::evaluation::{
    flops_per_morphology, BudgetLedger, FlopsModel, IndependentTrainer, LandscapeSpec,
    NicheLandscape,
};
use crate::metrics::{assign_population, population_metrics, RunMetrics, ScoredPopulation};
use crate::search::{
    run_loki, run_map_elites, run_random, run_tournament, Classifier, Design, RandomDesigns, World,
};
use crate::seed::{derive_seed, stream};

/// The trained artifacts a search runs against.
pub struct WorldParts {
    pub space: DesignSpace,
    pub vae: VaeModel<f64>,
    pub latent: ClusterModel<f64>,
    /// Raw-feature cells; only MAP-Elites needs them.
    pub raw: Option<ClusterModel<f64>>,
    pub raw_embedder: RawEmbedder,
    pub landscape: NicheLandscape<f64>,
    pub cfg: ExperimentConfig,
}

impl WorldParts {
    pub fn new(
        cfg: &ExperimentConfig,
        vae: VaeModel<f64>,
        latent: ClusterModel<f64>,
        raw: Option<ClusterModel<f64>>,
        landscape: LandscapeSpec,
    ) -> Result<Self, HarnessError> {
        let space = DesignSpace::new(AttributeSchema::default(), cfg.design_space.space_config());
        let landscape = NicheLandscape::from_spec(landscape, space.rows() * space.cols())?;
        Ok(Self {
            raw_embedder: RawEmbedder {
                schema: space.schema.clone(),
                rows: space.rows(),
            },
            space,
            vae,
            latent,
            raw,
            landscape,
            cfg: cfg.clone(),
        })
    }

    pub fn world(&self) -> World<'_, f64> {
        World {
            space: &self.space,
            latent: Classifier::new(&self.vae, &self.latent),
            landscape: &self.landscape,
            curve: self.cfg.landscape.curve,
        }
    }

    pub fn raw_classifier(&self) -> Option<Classifier<'_, f64>> {
        self.raw
            .as_ref()
            .map(|r| Classifier::new(&self.raw_embedder, r))
    }
}

/// Seed of the search streams for one entry of the config's seed list.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> u64 {
    derive_seed(cfg.root_seed, "search", seed)
}

pub fn run_name(algo: AlgoKind, seed: u64) -> String {
    format!("{algo}-seed{seed}")
}

/// A stored elite: LOKI pool member or baseline archive entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliteRecord {
    /// Latent cluster.
    pub cluster: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<usize>,
    pub rank: usize,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_seen_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    pub genome: MorphologyGenome,
}

/// A member of the final population handed to the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub rank: usize,
    pub cluster: usize,
    pub score: f64,
    pub genome: MorphologyGenome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub algo: AlgoKind,
    pub seed: u64,
    pub run_seed: u64,
    pub shared_budget: u64,
    pub planned_interactions: u64,
    pub ledger: BudgetLedger,
    pub searched: u64,
    pub flops_per_design: f64,
    /// Starved LOKI updates or MAP-Elites selections with replacement.
    pub events: usize,
    pub algorithm_config: serde_json::Value,
    pub metrics: RunMetrics,
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub elites: Vec<EliteRecord>,
    pub history_csv: Vec<u8>,
    pub finals: Vec<FinalRecord>,
}

impl RunOutcome {
    pub fn elite_file(&self) -> &'static str {
        if self.manifest.algo == AlgoKind::Loki {
            "pools.jsonl"
        } else {
            "archive.jsonl"
        }
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<(), HarnessError> {
        write_jsonl(&dir.join(self.elite_file()), &self.elites)?;
        write_jsonl(&dir.join("final.jsonl"), &self.finals)?;
        super::io::write_atomic(&dir.join("history.csv"), &self.history_csv)?;
        write_json(&dir.join("ledger.json"), &self.manifest.ledger)?;
        write_json(&dir.join("run.json"), &self.manifest)?;
        super::io::write_atomic(&dir.join("config.toml"), cfg.to_toml().as_bytes())
    }
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("records serialize");
    }
    w.into_inner().expect("in-memory writer")
}

fn by_score_desc(a: f64, b: f64) -> std::cmp::Ordering {
    b.partial_cmp(&a).unwrap_or(std::cmp::Ordering::Equal)
}

/// Runs one algorithm for one seed.
pub fn execute_run(
    parts: &WorldParts,
    algo: AlgoKind,
    seed: u64,
) -> Result<RunOutcome, HarnessError> {
    let cfg = &parts.cfg;
    let alg = &cfg.algorithm;
    let world = parts.world();
    let rs = run_seed(cfg, seed);
    let n_final = cfg.metrics.population;
    let trainer = |steps| IndependentTrainer {
        curve: cfg.landscape.curve,
        steps,
    };
    let (ledger, searched, flops, events, config_json, elites, history_csv, finals);
    match algo {
        AlgoKind::Loki => {
            let lc = alg.loki_for(rs);
            let run = run_loki(&world, &RandomDesigns, &lc)?;
            let mut el = Vec::new();
            let ranked: Vec<Vec<_>> = run.pools.iter().map(|p| p.ranked()).collect();
            for (k, r) in ranked.iter().enumerate() {
                for (rank, m) in r.iter().enumerate() {
                    el.push(EliteRecord {
                        cluster: k,
                        cell: None,
                        rank,
                        score: m.score,
                        first_seen_iter: Some(m.first_seen_iter),
                        id: None,
                        parent: None,
                        genome: (*m.design.genome).clone(),
                    });
                }
            }
            // take every cluster's best, then every cluster's second, ...
            let mut fin = Vec::new();
            let depth = ranked.iter().map(Vec::len).max().unwrap_or(0);
            'outer: for rank in 0..depth {
                for r in &ranked {
                    if let Some(m) = r.get(rank) {
                        if fin.len() == n_final {
                            break 'outer;
                        }
                        fin.push((m.design.clone(), m.score));
                    }
                }
            }
            let per_cluster = run.searched as f64 / lc.n_clusters as f64;
            flops = flops_per_morphology(&FlopsModel {
                iters: lc.n_iter as f64,
                morphologies_served: per_cluster.max(1.0),
                ..FlopsModel::transformer()
            })?;
            ledger = run.ledger;
            searched = run.searched;
            events = run.starvation_events;
            config_json = serde_json::to_value(&lc).expect("serializes");
            elites = el;
            history_csv = csv_bytes(&run.history.records);
            finals = fin;
        }
        AlgoKind::MapElites => {
            let mc = alg.map_elites_config();
            let raw = parts
                .raw_classifier()
                .ok_or_else(|| HarnessError::MissingField {
                    path: "world".into(),
                    field: "raw-feature clusters".into(),
                })?;
            let run = run_map_elites(
                &world,
                &raw,
                &RandomDesigns,
                &mc.mutation,
                &trainer(mc.train_steps),
                &mc,
                rs,
            )?;
            let mut el = Vec::new();
            for (c, cell) in run.archive.cells.iter().enumerate() {
                for (rank, e) in cell.iter().enumerate() {
                    el.push(EliteRecord {
                        cluster: e.design.cluster,
                        cell: Some(c),
                        rank,
                        score: e.fitness,
                        first_seen_iter: None,
                        id: Some(e.trained_index),
                        parent: None,
                        genome: (*e.design.genome).clone(),
                    });
                }
            }
            let mut all: Vec<(Design<f64>, f64, usize)> = run
                .archive
                .elites()
                .map(|e| (e.design.clone(), e.fitness, e.trained_index))
                .collect();
            all.sort_by(|a, b| by_score_desc(a.1, b.1).then(a.2.cmp(&b.2)));
            finals = all
                .into_iter()
                .take(n_final)
                .map(|(d, f, _)| (d, f))
                .collect();
            ledger = run.ledger;
            searched = run.trained as u64;
            events = run.underflow_events;
            flops = flops_per_morphology(&FlopsModel::mlp())?;
            config_json = serde_json::to_value(&mc).expect("serializes");
            elites = el;
            history_csv = csv_bytes(&run.history);
        }
        AlgoKind::Tournament => {
            let tc = alg.tournament_config();
            let run = run_tournament(
                &world,
                &RandomDesigns,
                &tc.mutation,
                &trainer(tc.train_steps),
                &tc,
                rs,
            )?;
            let mut pop: Vec<_> = run.population.iter().collect();
            pop.sort_by(|a, b| by_score_desc(a.fitness, b.fitness).then(a.id.cmp(&b.id)));
            elites = pop
                .iter()
                .enumerate()
                .map(|(rank, i)| EliteRecord {
                    cluster: i.design.cluster,
                    cell: None,
                    rank,
                    score: i.fitness,
                    first_seen_iter: None,
                    id: Some(i.id),
                    parent: i.parent,
                    genome: (*i.design.genome).clone(),
                })
                .collect();
            finals = pop
                .iter()
                .take(n_final)
                .map(|i| (i.design.clone(), i.fitness))
                .collect();
            ledger = run.ledger;
            searched = tc.trained_designs();
            events = 0;
            flops = flops_per_morphology(&FlopsModel::mlp())?;
            config_json = serde_json::to_value(&tc).expect("serializes");
            history_csv = csv_bytes(&run.history);
        }
        AlgoKind::Random => {
            let rc = alg.random_config();
            let (pop, l) = run_random(&world, &RandomDesigns, &trainer(rc.train_steps), &rc, rs)?;
            let mut pop: Vec<_> = pop.iter().collect();
            pop.sort_by(|a, b| by_score_desc(a.fitness, b.fitness).then(a.id.cmp(&b.id)));
            elites = pop
                .iter()
                .enumerate()
                .map(|(rank, i)| EliteRecord {
                    cluster: i.design.cluster,
                    cell: None,
                    rank,
                    score: i.fitness,
                    first_seen_iter: None,
                    id: Some(i.id),
                    parent: None,
                    genome: (*i.design.genome).clone(),
                })
                .collect();
            finals = pop
                .iter()
                .take(n_final)
                .map(|i| (i.design.clone(), i.fitness))
                .collect();
            ledger = l;
            searched = rc.count as u64;
            events = 0;
            flops = flops_per_morphology(&FlopsModel::mlp())?;
            config_json = serde_json::to_value(&rc).expect("serializes");
            history_csv = Vec::new();
        }
    }
    let finals: Vec<FinalRecord> = finals
        .into_iter()
        .enumerate()
        .map(|(rank, (d, score))| FinalRecord {
            rank,
            cluster: d.cluster,
            score,
            genome: (*d.genome).clone(),
        })
        .collect();
    let partial = RunMetrics {
        algo: algo.to_string(),
        seed,
        max_fitness: 0.0,
        qd_score_x100: 0.0,
        coverage_pct: 0.0,
        sparseness_mean: 0.0,
        interactions: ledger.interactions,
        searched,
        flops_per_design: flops,
    };
    let metrics = score_finals(parts, rs, &finals, partial)?;
    let mut ledger = ledger;
    ledger.flops_estimate = flops * searched as f64;
    Ok(RunOutcome {
        manifest: RunManifest {
            algo,
            seed,
            run_seed: rs,
            shared_budget: alg.shared_budget(),
            planned_interactions: alg.planned_interactions(algo),
            ledger,
            searched,
            flops_per_design: flops,
            events,
            algorithm_config: config_json,
            metrics,
        },
        elites,
        history_csv,
        finals,
    })
}

/// Fitness used for reporting: the mean of several noisy reads at the
/// evaluation budget, each design with its own stream.
pub fn metric_fitness(
    parts: &WorldParts,
    run_seed: u64,
    index: usize,
    design: &Design<f64>,
) -> f64 {
    let m = &parts.cfg.metrics;
    let curve = parts.cfg.landscape.curve;
    let mut rng = stream(run_seed, "metric-eval", index as u64);
    let total: f64 = (0..m.eval_seeds)
        .map(|_| curve.observe(design.asymptotic, design.tau, m.eval_steps as f64, &mut rng))
        .sum();
    total / m.eval_seeds as f64
}

pub fn scored_population(
    parts: &WorldParts,
    run_seed: u64,
    finals: &[FinalRecord],
) -> Result<ScoredPopulation<f64>, HarnessError> {
    let world = parts.world();
    let fitness: Vec<(Arc<MorphologyGenome>, f64)> = finals
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let g = Arc::new(f.genome.clone());
            let d = world.design(g.clone());
            (g, metric_fitness(parts, run_seed, i, &d))
        })
        .collect();
    Ok(assign_population(&parts.space, &world.latent, fitness)?)
}

fn score_finals(
    parts: &WorldParts,
    run_seed: u64,
    finals: &[FinalRecord],
    mut row: RunMetrics,
) -> Result<RunMetrics, HarnessError> {
    let pop = scored_population(parts, run_seed, finals)?;
    let (max, qd, cov, sparse) = population_metrics(&pop, parts.cfg.metrics.k_neighbors)?;
    row.max_fitness = max;
    row.qd_score_x100 = 100.0 * qd;
    row.coverage_pct = cov;
    row.sparseness_mean = sparse;
    Ok(row)
}

/// Recomputes a stored run's metrics from its archived final population.
pub fn replay_metrics(parts: &WorldParts, dir: &Path) -> Result<RunMetrics, HarnessError> {
    let manifest: RunManifest = read_json(&dir.join("run.json"))?;
    let finals: Vec<FinalRecord> = read_jsonl(&dir.join("final.jsonl"))?;
    let row = RunMetrics {
        algo: manifest.algo.to_string(),
        seed: manifest.seed,
        max_fitness: 0.0,
        qd_score_x100: 0.0,
        coverage_pct: 0.0,
        sparseness_mean: 0.0,
        interactions: manifest.ledger.interactions,
        searched: manifest.searched,
        flops_per_design: manifest.flops_per_design,
    };
    score_finals(parts, manifest.run_seed, &finals, row)
}

pub fn write_metrics_csv(path: &Path, rows: &[RunMetrics]) -> Result<(), HarnessError> {
    write_csv(path, rows)
}

const METRIC_FIELDS: [&str; 9] = [
    "algo",
    "seed",
    "max_fitness",
    "qd_score_x100",
    "coverage_pct",
    "sparseness_mean",
    "interactions",
    "searched",
    "flops_per_design",
];

/// Stored metrics of each run directory, in the given order.
pub fn collect_run_metrics(dirs: &[std::path::PathBuf]) -> Result<Vec<RunMetrics>, HarnessError> {
    dirs.iter()
        .map(|dir| {
            let path = dir.join("run.json");
            let value: serde_json::Value = read_json(&path)?;
            let missing = |field: &str| HarnessError::MissingField {
                path: path.display().to_string(),
                field: field.to_string(),
            };
            let m = value.get("metrics").ok_or_else(|| missing("metrics"))?;
            for f in METRIC_FIELDS {
                if m.get(f).is_none() {
                    return Err(missing(&format!("metrics.{f}")));
                }
            }
            serde_json::from_value(m.clone()).map_err(|e| HarnessError::Format {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        })
        .collect()
}
