use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AlgoKind, ExperimentConfig};
use super::io::{
    file_sha256, io_err, read_csv, read_designs, read_json, sha256_hex, write_atomic,
    write_designs, write_json,
};
use super::runs::{
    execute_run, replay_metrics, run_name, write_metrics_csv, RunManifest, WorldParts,
};
use super::HarnessError;
use crate::clustering::{kmeans_fit, ClusterModel, FeatureSpace};
use crate::design_space::{AttributeSchema, DesignSpace, MorphologyGenome};
use crate::embedding::{raw_features, train_vae, VaeConfig, VaeModel};
use crate::evaluation::{deceptive_spec, LandscapeSpec};
use crate::metrics::{format_table, summarize, RunMetrics};
use crate::seed::{derive_seed, stream};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub hash: String,
    /// Output path relative to the run directory, and its sha256.
    pub outputs: BTreeMap<String, String>,
    pub seconds: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: String,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }
}

pub struct PipelineReport {
    pub stages: Vec<StageRecord>,
    pub metrics: Vec<RunMetrics>,
    pub table: String,
}

pub fn hash_parts(parts: &[&str]) -> String {
    let mut joined = Vec::new();
    for p in parts {
        joined.extend_from_slice(&(p.len() as u64).to_le_bytes());
        joined.extend_from_slice(p.as_bytes());
    }
    sha256_hex(&joined)
}

fn section<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("config sections serialize")
}

struct Runner {
    out: PathBuf,
    previous: Manifest,
}

enum Plan {
    Skip(StageRecord),
    Run,
}

impl Runner {
    fn plan(&self, name: &str, hash: &str) -> Result<Plan, HarnessError> {
        let Some(rec) = self.previous.stage(name) else {
            return Ok(Plan::Run);
        };
        if rec.hash != hash {
            return Ok(Plan::Run);
        }
        for (rel, sha) in &rec.outputs {
            let path = self.out.join(rel);
            if !path.exists() {
                return Ok(Plan::Run);
            }
            if file_sha256(&path)? != *sha {
                return Err(HarnessError::HashMismatch {
                    file: path.display().to_string(),
                });
            }
        }
        Ok(Plan::Skip(StageRecord {
            skipped: true,
            seconds: 0.0,
            ..rec.clone()
        }))
    }

    fn staging(&self, name: &str) -> PathBuf {
        self.out.join(".staging").join(name)
    }

    /// Runs `produce` into a staging directory, then moves its outputs into
    /// place. On failure the staging directory is kept as `<name>.partial`.
    fn execute<T>(
        &self,
        name: &str,
        hash: &str,
        produce: impl FnOnce(&Path) -> Result<(T, Vec<String>), HarnessError>,
    ) -> Result<(T, StageRecord), HarnessError> {
        let staging = self.staging(name);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        fs::create_dir_all(&staging).map_err(io_err(&staging))?;
        let start = Instant::now();
        let (value, outputs) = match produce(&staging) {
            Ok(v) => v,
            Err(e) => {
                let partial = self.out.join(format!("{name}.partial"));
                let _ = fs::remove_dir_all(&partial);
                let _ = fs::rename(&staging, &partial);
                return Err(HarnessError::Stage {
                    stage: name.to_string(),
                    source: Box::new(e),
                });
            }
        };
        let mut hashes = BTreeMap::new();
        for rel in outputs {
            let from = staging.join(&rel);
            let to = self.out.join(&rel);
            if let Some(dir) = to.parent() {
                fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            fs::rename(&from, &to).map_err(io_err(&to))?;
            hashes.insert(rel, file_sha256(&to)?);
        }
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        let record = StageRecord {
            name: name.to_string(),
            hash: hash.to_string(),
            outputs: hashes,
            seconds: start.elapsed().as_secs_f64(),
            skipped: false,
        };
        Ok((value, record))
    }

    fn stage<T>(
        &self,
        name: &str,
        hash: &str,
        produce: impl FnOnce(&Path) -> Result<(T, Vec<String>), HarnessError>,
        load: impl FnOnce(&Path) -> Result<T, HarnessError>,
    ) -> Result<(T, StageRecord), HarnessError> {
        match self.plan(name, hash)? {
            Plan::Skip(rec) => {
                log::info!("stage {name}: up to date");
                Ok((load(&self.out)?, rec))
            }
            Plan::Run => {
                log::info!("stage {name}: running");
                self.execute(name, hash, produce)
            }
        }
    }
}

pub fn design_space(cfg: &ExperimentConfig) -> DesignSpace {
    DesignSpace::new(AttributeSchema::default(), cfg.design_space.space_config())
}

pub fn generate_designs(space: &DesignSpace, count: usize, seed: u64) -> Vec<MorphologyGenome> {
    let mut rng = stream(seed, "designs", 0);
    (0..count).map(|_| space.sample(&mut rng)).collect()
}

pub fn train_embedding(
    space: &DesignSpace,
    designs: &[MorphologyGenome],
    vae: &VaeConfig,
) -> Result<VaeModel<f64>, HarnessError> {
    let data = designs
        .iter()
        .map(|g| space.serialize(g))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(train_vae(&data, &space.schema, vae)?)
}

pub fn fit_clusters(
    space: &DesignSpace,
    designs: &[MorphologyGenome],
    vae: &VaeModel<f64>,
    k: usize,
    feature_space: FeatureSpace,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterModel<f64>, HarnessError> {
    let points: Vec<Vec<f64>> = designs
        .par_iter()
        .map(|g| {
            let s = space.serialize(g)?;
            Ok(match feature_space {
                FeatureSpace::Latent => vae.encode(&s)?,
                FeatureSpace::Raw => raw_features(&s, &space.schema),
            })
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(kmeans_fit(&points, k, seed, max_iters, feature_space)?)
}

/// Runs every stage whose inputs changed and returns the metrics.
pub fn pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<PipelineReport, HarnessError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(super::config::ConfigError::Validation(problems).into());
    }
    let manifest_path = out.join(MANIFEST);
    let previous = if manifest_path.exists() {
        read_json(&manifest_path)?
    } else {
        Manifest::default()
    };
    let runner = Runner {
        out: out.to_path_buf(),
        previous,
    };
    let config_text = cfg.to_toml();
    let mut manifest = Manifest {
        config_hash: sha256_hex(config_text.as_bytes()),
        config: config_text.clone(),
        stages: Vec::new(),
    };
    write_atomic(&out.join("config.toml"), config_text.as_bytes())?;
    let record = |manifest: &mut Manifest, rec: StageRecord| -> Result<(), HarnessError> {
        manifest.stages.push(rec);
        write_json(&manifest_path, manifest)
    };

    let space = design_space(cfg);
    let root = cfg.root_seed;
    let ds_section = section(&cfg.design_space);

    let designs_hash = hash_parts(&["designs", &root.to_string(), &ds_section]);
    let (designs, rec) = runner.stage(
        "designs",
        &designs_hash,
        |dir| {
            let designs = generate_designs(&space, cfg.design_space.designs, root);
            write_designs(&dir.join("designs.jsonl"), &designs, root)?;
            Ok((designs, vec!["designs.jsonl".into()]))
        },
        |dir| read_designs(&dir.join("designs.jsonl")),
    )?;
    record(&mut manifest, rec)?;

    let embed_hash = hash_parts(&["embedding", &designs_hash, &section(&cfg.vae)]);
    let (vae, rec) = runner.stage(
        "embedding",
        &embed_hash,
        |dir| {
            let vcfg = VaeConfig {
                seed: derive_seed(root, "vae", cfg.vae.seed),
                ..cfg.vae.clone()
            };
            let vae = train_embedding(&space, &designs, &vcfg)?;
            write_json(&dir.join("vae.json"), &vae)?;
            Ok((vae, vec!["vae.json".into()]))
        },
        |dir| read_json(&dir.join("vae.json")),
    )?;
    record(&mut manifest, rec)?;

    let cluster_hash = hash_parts(&["clusters", &embed_hash, &section(&cfg.clustering)]);
    let ((latent, raw), rec) = runner.stage(
        "clusters",
        &cluster_hash,
        |dir| {
            let c = &cfg.clustering;
            let latent = fit_clusters(
                &space,
                &designs,
                &vae,
                c.k,
                FeatureSpace::Latent,
                derive_seed(root, "clusters", 0),
                c.max_iters,
            )?;
            let raw = fit_clusters(
                &space,
                &designs,
                &vae,
                c.raw_k(),
                FeatureSpace::Raw,
                derive_seed(root, "clusters-raw", 0),
                c.max_iters,
            )?;
            write_json(&dir.join("clusters.json"), &latent)?;
            write_json(&dir.join("clusters_raw.json"), &raw)?;
            Ok((
                (latent, raw),
                vec!["clusters.json".into(), "clusters_raw.json".into()],
            ))
        },
        |dir| {
            Ok((
                read_json(&dir.join("clusters.json"))?,
                read_json(&dir.join("clusters_raw.json"))?,
            ))
        },
    )?;
    record(&mut manifest, rec)?;

    let landscape_hash = hash_parts(&[
        "landscape",
        &root.to_string(),
        &ds_section,
        &section(&cfg.landscape.deceptive),
    ]);
    let (landscape, rec) = runner.stage(
        "landscape",
        &landscape_hash,
        |dir| {
            let spec = deceptive_spec(
                &space,
                derive_seed(root, "landscape", 0),
                &cfg.landscape.deceptive,
            );
            write_json(&dir.join("landscape.json"), &spec)?;
            Ok((spec, vec!["landscape.json".into()]))
        },
        |dir| read_json::<LandscapeSpec>(&dir.join("landscape.json")),
    )?;
    record(&mut manifest, rec)?;

    let parts = WorldParts::new(cfg, vae, latent, Some(raw), landscape)?;
    let run_inputs = hash_parts(&[
        "run-inputs",
        &cluster_hash,
        &landscape_hash,
        &section(&cfg.landscape.curve),
        &section(&cfg.algorithm),
        &section(&cfg.metrics),
    ]);
    let jobs: Vec<(AlgoKind, u64)> = cfg
        .algorithm
        .kinds
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let runs: Vec<(String, RunManifest, StageRecord)> = jobs
        .par_iter()
        .map(|&(algo, seed)| {
            let name = run_name(algo, seed);
            let hash = hash_parts(&[
                "run",
                &run_inputs,
                algo.name(),
                &seed.to_string(),
                &root.to_string(),
            ]);
            let (m, rec) = runner.stage(
                &format!("run-{name}"),
                &hash,
                |dir| {
                    let outcome = execute_run(&parts, algo, seed)?;
                    let rel = format!("runs/{name}");
                    let files = [
                        outcome.elite_file(),
                        "final.jsonl",
                        "history.csv",
                        "ledger.json",
                        "run.json",
                        "config.toml",
                    ];
                    let run_dir = dir.join(&rel);
                    outcome.write(&run_dir, cfg)?;
                    Ok((
                        outcome.manifest,
                        files.iter().map(|f| format!("{rel}/{f}")).collect(),
                    ))
                },
                |dir| read_json(&dir.join("runs").join(&name).join("run.json")),
            )?;
            Ok((name, m, rec))
        })
        .collect::<Result<_, HarnessError>>()?;
    let mut run_hashes = Vec::new();
    let mut stored = Vec::new();
    for (name, m, rec) in runs {
        run_hashes.push(rec.hash.clone());
        stored.push((name, m));
        record(&mut manifest, rec)?;
    }

    let mut pieces = vec!["metrics"];
    pieces.extend(run_hashes.iter().map(String::as_str));
    let metrics_hash = hash_parts(&pieces);
    let (metrics, rec) = runner.stage(
        "metrics",
        &metrics_hash,
        |dir| {
            let rows: Vec<RunMetrics> = stored
                .par_iter()
                .map(|(name, m)| {
                    let replayed = replay_metrics(&parts, &out.join("runs").join(name))?;
                    if replayed != m.metrics {
                        return Err(HarnessError::MetricsMismatch { run: name.clone() });
                    }
                    Ok(replayed)
                })
                .collect::<Result<_, HarnessError>>()?;
            write_metrics_csv(&dir.join("metrics.csv"), &rows)?;
            Ok((rows, vec!["metrics.csv".into()]))
        },
        |dir| read_csv(&dir.join("metrics.csv")),
    )?;
    record(&mut manifest, rec)?;

    let report_hash = hash_parts(&["report", &metrics_hash]);
    let (table, rec) = runner.stage(
        "report",
        &report_hash,
        |dir| {
            let summary = summarize(&metrics);
            let table = format_table(&summary);
            write_atomic(&dir.join("report.txt"), table.as_bytes())?;
            super::io::write_json(&dir.join("summary.json"), &summary)?;
            Ok((table, vec!["report.txt".into(), "summary.json".into()]))
        },
        |dir| {
            String::from_utf8(super::io::read(&dir.join("report.txt"))?).map_err(|e| {
                HarnessError::Format {
                    path: "report.txt".into(),
                    message: e.to_string(),
                }
            })
        },
    )?;
    record(&mut manifest, rec)?;
    let _ = fs::remove_dir(out.join(".staging"));

    Ok(PipelineReport {
        stages: manifest.stages,
        metrics,
        table,
    })
}
