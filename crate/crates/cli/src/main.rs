use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use qdc::clustering::{ClusterModel, FeatureSpace};
use qdc::embedding::{VaeConfig, VaeModel};
use qdc::evaluation::{
    deceptive_spec, flops_per_morphology, searched_morphologies, total_interactions, FlopsModel,
    LandscapeSpec,
};
use qdc::harness::io::{read_designs, read_json, write_designs, write_json};
use qdc::harness::{
    collect_run_metrics, configure_workers, design_space, execute_run, fit_clusters,
    generate_designs, pipeline, replay_metrics, train_embedding, write_metrics_csv, AlgoKind,
    ExperimentConfig, WorldParts,
};
use qdc::metrics::{format_table, summarize};

#[derive(Parser)]
#[command(
    name = "qdc",
    version,
    about = "Clustered quality-diversity co-design search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample random designs into a JSON-lines file.
    GenDesigns {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Take `l_max` and the limb-count distribution from this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the design embedding.
    TrainEmbedding {
        #[arg(long)]
        designs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        latent: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Remaining embedding settings; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit k-means in latent or raw feature space.
    Cluster {
        #[arg(long)]
        designs: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "latent")]
        space: FeatureSpace,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = qdc::clustering::DEFAULT_MAX_ITERS)]
        max_iters: usize,
    },
    /// Build the deceptive fitness landscape.
    Landscape {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one search algorithm.
    Run {
        #[arg(long)]
        algo: AlgoKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        landscape: PathBuf,
        #[arg(long)]
        vae: PathBuf,
        /// Raw-feature cells, needed by map-elites.
        #[arg(long)]
        raw_clusters: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute metrics from run directories.
    Metrics {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        landscape: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the interaction, search-count and FLOP bookkeeping.
    Accounting {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Summarize stored run metrics.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage, reusing outputs whose inputs are unchanged.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn config_or_default(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(ExperimentConfig::with_seeds(vec![0])),
    }
}

fn accounting(cfg: &ExperimentConfig) -> Result<()> {
    let loki = &cfg.algorithm.loki;
    let s = searched_morphologies(loki);
    let mlp = flops_per_morphology(&FlopsModel::mlp())?;
    let tf = flops_per_morphology(&FlopsModel {
        iters: loki.n_iter as f64,
        ..FlopsModel::transformer()
    })?;
    println!("clusters                          {}", loki.n_clusters);
    println!(
        "total interactions                {}",
        total_interactions(loki)
    );
    println!(
        "sampled per cluster               {}",
        s.sampled_per_cluster
    );
    println!("sampled total                     {}", s.total_sampled);
    println!("searched per cluster (with pool)  {}", s.per_cluster);
    println!("searched total (with pool)        {}", s.total);
    println!("FLOPs per design, MLP             {mlp:.4e}");
    println!("FLOPs per design, transformer     {tf:.4e}");
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    configure_workers();
    match Cli::parse().command {
        Command::GenDesigns {
            count,
            seed,
            out,
            config,
        } => {
            let cfg = config_or_default(config.as_deref())?;
            let designs = generate_designs(&design_space(&cfg), count, seed);
            write_designs(&out, &designs, seed)?;
            log::info!("wrote {count} designs to {}", out.display());
        }
        Command::TrainEmbedding {
            designs,
            out,
            latent,
            epochs,
            seed,
            config,
        } => {
            let cfg = config_or_default(config.as_deref())?;
            let space = design_space(&cfg);
            let designs = read_designs(&designs)?;
            let vcfg = VaeConfig {
                latent_dim: latent.unwrap_or(cfg.vae.latent_dim),
                epochs: epochs.unwrap_or(cfg.vae.epochs),
                seed: seed.unwrap_or(cfg.vae.seed),
                ..cfg.vae.clone()
            };
            let vae = train_embedding(&space, &designs, &vcfg)?;
            if let Some(last) = vae.history.epochs.last() {
                log::info!("final loss {:.6}", last.total);
            }
            write_json(&out, &vae)?;
        }
        Command::Cluster {
            designs,
            model,
            k,
            space,
            seed,
            out,
            max_iters,
        } => {
            let designs = read_designs(&designs)?;
            let vae: VaeModel<f64> = read_json(&model)?;
            let mut cfg = ExperimentConfig::with_seeds(vec![0]);
            cfg.design_space.l_max = vae.rows - 1;
            let model = fit_clusters(
                &design_space(&cfg),
                &designs,
                &vae,
                k,
                space,
                seed,
                max_iters,
            )?;
            write_json(&out, &model)?;
        }
        Command::Landscape { config, seed, out } => {
            let cfg = load_config(&config)?;
            let spec = deceptive_spec(&design_space(&cfg), seed, &cfg.landscape.deceptive);
            write_json(&out, &spec)?;
        }
        Command::Run {
            algo,
            config,
            clusters,
            landscape,
            vae,
            raw_clusters,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let raw = raw_clusters
                .as_deref()
                .map(read_json::<ClusterModel<f64>>)
                .transpose()?;
            if algo == AlgoKind::MapElites && raw.is_none() {
                bail!("map-elites needs --raw-clusters");
            }
            let parts = WorldParts::new(
                &cfg,
                read_json(&vae)?,
                read_json(&clusters)?,
                raw,
                read_json(&landscape)?,
            )?;
            let outcome = execute_run(&parts, algo, seed)?;
            outcome.write(&out, &cfg)?;
            let m = &outcome.manifest;
            println!(
                "{algo} seed {seed}: interactions {} searched {} max fitness {:.4} QD {:.2} coverage {:.1}%",
                m.ledger.interactions, m.searched, m.metrics.max_fitness, m.metrics.qd_score_x100, m.metrics.coverage_pct
            );
        }
        Command::Metrics {
            runs,
            vae,
            clusters,
            landscape,
            out,
        } => {
            let vae: VaeModel<f64> = read_json(&vae)?;
            let clusters: ClusterModel<f64> = read_json(&clusters)?;
            let landscape: LandscapeSpec = read_json(&landscape)?;
            let mut rows = Vec::new();
            for dir in &runs {
                let cfg = load_config(&dir.join("config.toml"))?;
                let parts =
                    WorldParts::new(&cfg, vae.clone(), clusters.clone(), None, landscape.clone())?;
                rows.push(replay_metrics(&parts, dir)?);
            }
            write_metrics_csv(&out, &rows)?;
            print!("{}", format_table(&summarize(&rows)));
        }
        Command::Accounting { config } => {
            accounting(&config_or_default(config.as_deref())?)?;
        }
        Command::Report { runs, out } => {
            let rows = collect_run_metrics(&runs)?;
            if let Some(out) = out {
                write_metrics_csv(&out, &rows)?;
            }
            print!("{}", format_table(&summarize(&rows)));
        }
        Command::Pipeline { config, out } => {
            let cfg = load_config(&config)?;
            let report = pipeline(&cfg, &out)?;
            for s in &report.stages {
                let state = if s.skipped { "skipped" } else { "ran" };
                log::info!("{:<28} {state:<8} {:>8.2}s", s.name, s.seconds);
            }
            print!("{}", report.table);
        }
    }
    Ok(())
}
