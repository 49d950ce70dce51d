mod common;

use std::collections::HashSet;
use std::sync::Arc;

use common::Fixture;
use qdc::design_space::MutationParams;
use qdc::evaluation::{total_interactions, IndependentTrainer, LearningCurveModel};
use qdc::search::{
    merge, run_loki, run_loki_cluster, run_map_elites, run_random, run_tournament,
    tournament_select, Classifier, Design, DesignCatalog, DesignSource, Individual, LokiConfig,
    MapElitesConfig, RandomConfig, RandomDesigns, Replacement, TournamentConfig, Variation, World,
};
use qdc::seed::{rng_from_seed, Rng};

fn quiet(mut f: Fixture, kappa: f64) -> Fixture {
    f.curve = LearningCurveModel {
        kappa,
        noise_sd: 0.0,
        ..f.curve
    };
    f
}

fn ids(designs: &[Design<f64>], catalog: &DesignCatalog<f64>) -> HashSet<usize> {
    designs
        .iter()
        .map(|d| {
            catalog
                .designs
                .iter()
                .position(|c| Arc::ptr_eq(&c.genome, &d.genome))
                .unwrap()
        })
        .collect()
}

fn thirty(seed: u64) -> (Fixture, Vec<qdc::design_space::MorphologyGenome>) {
    let fx = quiet(Fixture::strips(1), 0.0);
    let mut rng = rng_from_seed(1000 + seed);
    let genomes = (0..30).map(|_| fx.space.sample(&mut rng)).collect();
    (fx, genomes)
}

fn small_loki(seed: u64, replacement: Replacement) -> LokiConfig {
    LokiConfig {
        n_clusters: 1,
        n_iter: 60,
        f_diff: 2,
        pool_size: 5,
        n_sample: 8,
        n_filter: 2,
        per_cluster_budget: 60_000,
        l_eval: 10,
        seed,
        replacement,
        generalization_radius: f64::INFINITY,
        ..LokiConfig::default()
    }
}

#[test]
fn loki_finds_the_exhaustive_top_pool() {
    for seed in 0..10 {
        let (fx, genomes) = thirty(seed);
        let world = fx.world();
        let catalog = DesignCatalog::new(&world, genomes);
        let mut order: Vec<usize> = (0..30).collect();
        let f = |i: usize| catalog.designs[i].asymptotic;
        order.sort_by(|&a, &b| f(b).total_cmp(&f(a)));
        assert!(f(order[4]) > f(order[5]), "top set must be unambiguous");
        let truth: HashSet<usize> = order[..5].iter().copied().collect();

        let run = run_loki(
            &world,
            &catalog,
            &small_loki(seed, Replacement::Conditional),
        )
        .unwrap();
        let pool: Vec<Design<f64>> = run.pools[0]
            .members
            .iter()
            .map(|m| m.design.clone())
            .collect();
        assert_eq!(ids(&pool, &catalog), truth, "seed {seed}");

        // unconditional replacement always keeps the newest n_filter
        // candidates, so only the rest of the pool is guaranteed to be elite
        let run = run_loki(
            &world,
            &catalog,
            &small_loki(seed, Replacement::Unconditional),
        )
        .unwrap();
        let pool: Vec<Design<f64>> = run.pools[0]
            .members
            .iter()
            .map(|m| m.design.clone())
            .collect();
        let got = ids(&pool, &catalog);
        let top3: HashSet<usize> = order[..3].iter().copied().collect();
        assert!(top3.is_subset(&got), "seed {seed}");
    }
}

#[test]
fn no_filter_means_no_change() {
    let fx = Fixture::strips(2);
    let world = fx.world();
    let base = LokiConfig {
        n_clusters: 2,
        n_iter: 1,
        pool_size: 4,
        n_sample: 6,
        n_filter: 0,
        per_cluster_budget: 1000,
        seed: 3,
        ..LokiConfig::default()
    };
    let init = run_loki(&world, &RandomDesigns, &base).unwrap();
    let long = run_loki(&world, &RandomDesigns, &LokiConfig { n_iter: 40, ..base }).unwrap();
    for (a, b) in init.pools.iter().zip(&long.pools) {
        let ga: Vec<_> = a.members.iter().map(|m| m.design.genome.clone()).collect();
        let gb: Vec<_> = b.members.iter().map(|m| m.design.genome.clone()).collect();
        assert_eq!(ga, gb);
    }
}

#[test]
fn pools_stay_full_and_in_cluster() {
    let fx = Fixture::latent(3, 5);
    let world = fx.world();
    let cfg = LokiConfig {
        n_clusters: 3,
        n_iter: 20,
        pool_size: 6,
        n_sample: 10,
        n_filter: 3,
        per_cluster_budget: 20_000,
        seed: 8,
        ..LokiConfig::default()
    };
    let run = run_loki(&world, &RandomDesigns, &cfg).unwrap();
    assert_eq!(run.starvation_events, 0);
    assert_eq!(run.ledger.interactions, total_interactions(&cfg));
    assert_eq!(run.searched, 3 * (6 + 10 * 10));
    for (k, pool) in run.pools.iter().enumerate() {
        assert_eq!(pool.members.len(), cfg.pool_size);
        for m in &pool.members {
            let again = world.design(m.design.genome.clone());
            assert_eq!(again.cluster, k);
        }
    }
    for k in 0..3 {
        let iters: Vec<usize> = run
            .history
            .records
            .iter()
            .filter(|r| r.cluster == k)
            .map(|r| r.iter)
            .collect();
        assert_eq!(iters, (1..=20).collect::<Vec<_>>());
    }
    let replaced: usize = run
        .pools
        .iter()
        .flat_map(|p| &p.update_log)
        .map(|u| u.replaced)
        .sum();
    assert_eq!(replaced, 3 * 10 * 3);
}

#[test]
fn default_schedule_spends_the_closed_form_budget() {
    let fx = Fixture::strips(40);
    let world = fx.world();
    let mut rng = rng_from_seed(77);
    let genomes: Vec<_> = (0..12_000).map(|_| fx.space.sample(&mut rng)).collect();
    let catalog = DesignCatalog::new(&world, genomes);
    assert!((0..40).all(|k| catalog.bucket(k).len() >= 20 + 128));
    let cfg = LokiConfig::default();
    let run = run_loki(&world, &catalog, &cfg).unwrap();
    assert_eq!(run.starvation_events, 0);
    assert_eq!(run.ledger.interactions, 4_624_640_000);
    assert_eq!(run.ledger.interactions, total_interactions(&cfg));
    assert_eq!(run.searched, 40 * (20 + 610 * 128));
}

#[test]
fn clusters_are_independent_of_scheduling() {
    let fx = Fixture::latent(4, 11);
    let world = fx.world();
    let cfg = LokiConfig {
        n_clusters: 4,
        n_iter: 12,
        pool_size: 5,
        n_sample: 6,
        per_cluster_budget: 5_000,
        seed: 2,
        ..LokiConfig::default()
    };
    let parallel = run_loki(&world, &RandomDesigns, &cfg).unwrap();
    let sequential = merge(
        (0..4)
            .rev()
            .map(|k| run_loki_cluster(&world, &RandomDesigns, &cfg, k).unwrap())
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect(),
    );
    assert_eq!(parallel.history, sequential.history);
    for (a, b) in parallel.pools.iter().zip(&sequential.pools) {
        let sa: Vec<(f64, _)> = a
            .members
            .iter()
            .map(|m| (m.score, m.design.genome.clone()))
            .collect();
        let sb: Vec<(f64, _)> = b
            .members
            .iter()
            .map(|m| (m.score, m.design.genome.clone()))
            .collect();
        assert_eq!(sa, sb);
    }
}

#[test]
fn map_elites_budget_and_archive_invariants() {
    let fx = Fixture::latent(5, 3);
    let world = fx.world();
    let cells = world.latent;
    let trainer = IndependentTrainer {
        curve: fx.curve,
        steps: 5_000_000,
    };
    let cfg = MapElitesConfig {
        n_train: 4000,
        batch: 20,
        train_steps: 5_000_000,
        elites_per_cell: 3,
        mutation: MutationParams::default(),
    };
    let run = run_map_elites(
        &world,
        &cells,
        &RandomDesigns,
        &cfg.mutation,
        &trainer,
        &cfg,
        4,
    )
    .unwrap();
    assert_eq!(run.trained, 4000);
    assert_eq!(run.ledger.interactions, 20_000_000_000);
    for (c, cell) in run.archive.cells.iter().enumerate() {
        assert!(cell.len() <= 3);
        assert!(cell.windows(2).all(|w| w[0].fitness >= w[1].fitness));
        for e in cell {
            assert_eq!(cells.classify(&fx.space, &e.design.genome), c);
        }
    }
}

#[test]
fn map_elites_without_variation_is_stationary() {
    let fx = quiet(Fixture::latent(4, 6), 1.0);
    let world = fx.world();
    let trainer = IndependentTrainer {
        curve: fx.curve,
        steps: 10_000,
    };
    let still = MutationParams {
        p_perturb: 1.0,
        p_resample: 0.0,
        p_grow: 0.0,
        p_prune: 0.0,
        sigma: 0.0,
    };
    let cfg = MapElitesConfig {
        n_train: 200,
        batch: 10,
        train_steps: 10_000,
        elites_per_cell: 3,
        mutation: still.clone(),
    };
    let bests = |n_train: usize| {
        let cfg = MapElitesConfig {
            n_train,
            ..cfg.clone()
        };
        let run = run_map_elites(
            &world,
            &world.latent,
            &RandomDesigns,
            &still,
            &trainer,
            &cfg,
            1,
        )
        .unwrap();
        run.archive
            .cells
            .iter()
            .map(|c| c.first().map(|e| e.fitness))
            .collect::<Vec<_>>()
    };
    // children are copies of their parents, so no cell's best ever moves
    let after_init = bests(10);
    assert_eq!(bests(200), after_init);
    assert_eq!(bests(20), after_init);
}

/// Variation that ignores the parent and draws afresh from a catalog.
struct Redraw<'a>(&'a DesignCatalog<f64>);

impl Variation<f64> for Redraw<'_> {
    fn vary(&self, _parent: &Design<f64>, world: &World<f64>, rng: &mut Rng) -> Design<f64> {
        self.0.draw(world, rng)
    }
}

#[test]
fn map_elites_single_cell_keeps_the_argmax() {
    let fx = quiet(Fixture::strips(1), 1.0);
    let world = fx.world();
    let mut rng = rng_from_seed(12);
    let catalog = DesignCatalog::new(&world, (0..10).map(|_| fx.space.sample(&mut rng)));
    let trainer = IndependentTrainer {
        curve: fx.curve,
        steps: 50_000,
    };
    let cfg = MapElitesConfig {
        n_train: 300,
        batch: 5,
        train_steps: 50_000,
        elites_per_cell: 1,
        mutation: MutationParams::default(),
    };
    let run = run_map_elites(
        &world,
        &world.latent,
        &catalog,
        &Redraw(&catalog),
        &trainer,
        &cfg,
        0,
    )
    .unwrap();
    let trained = |d: &Design<f64>| fx.curve.expected(d.asymptotic, d.tau, 50_000.0);
    let best = catalog
        .designs
        .iter()
        .max_by(|a, b| trained(a).total_cmp(&trained(b)))
        .unwrap();
    let elite = &run.archive.cells[0][0];
    assert!(Arc::ptr_eq(&elite.design.genome, &best.genome));
    assert_eq!(elite.fitness, trained(best));
}

#[test]
fn full_tournament_picks_the_global_best() {
    let fx = Fixture::strips(1);
    let world = fx.world();
    let mut rng = rng_from_seed(4);
    let pop: Vec<Individual<f64>> = (0..12)
        .map(|id| Individual {
            id,
            parent: None,
            generation: 0,
            design: RandomDesigns.draw(&world, &mut rng),
            fitness: ((id * 7) % 12) as f64,
        })
        .collect();
    for _ in 0..50 {
        assert_eq!(pop[tournament_select(&pop, 12, &mut rng)].fitness, 11.0);
    }
}

#[test]
fn tournament_budget_and_lineage() {
    let fx = Fixture::latent(3, 2);
    let world = fx.world();
    let trainer = IndependentTrainer {
        curve: fx.curve,
        steps: 3_000,
    };
    let cfg = TournamentConfig {
        population: 10,
        generations: 7,
        offspring: 4,
        tournament_size: 3,
        train_steps: 3_000,
        mutation: MutationParams::default(),
    };
    let run = run_tournament(&world, &RandomDesigns, &cfg.mutation, &trainer, &cfg, 5).unwrap();
    assert_eq!(run.population.len(), 10);
    assert_eq!(run.ledger.interactions, cfg.trained_designs() * 3_000);
    for w in run.history.windows(2) {
        assert_eq!(w[1].interactions - w[0].interactions, 4 * 3_000);
    }
    assert_eq!(run.lineage.len(), 10 + 7 * 4);
    for rec in &run.lineage[10..] {
        assert!(rec.parent.unwrap() < rec.id);
    }
}

/// Short per-design training on the deceptive landscape rewards the broad,
/// low niche of fast-learning designs.
#[test]
fn short_training_converges_on_fast_learners() {
    let fx = Fixture::strips(1);
    let world = fx.world();
    let trainer = IndependentTrainer {
        curve: fx.curve,
        steps: 2_000,
    };
    let cfg = TournamentConfig {
        population: 24,
        generations: 40,
        offspring: 8,
        tournament_size: 4,
        train_steps: 2_000,
        mutation: MutationParams::default(),
    };
    let mut hits = 0;
    for seed in 0..10 {
        let run =
            run_tournament(&world, &RandomDesigns, &cfg.mutation, &trainer, &cfg, seed).unwrap();
        let best = run
            .population
            .iter()
            .max_by(|a, b| a.fitness.total_cmp(&b.fitness))
            .unwrap();
        hits += usize::from(best.design.niche == 0);
    }
    assert!(hits >= 8, "broad niche won in {hits}/10 seeds");
}

#[test]
fn random_search_counts() {
    let fx = Fixture::latent(2, 1);
    let world = fx.world();
    let trainer = IndependentTrainer {
        curve: fx.curve,
        steps: 777,
    };
    let cfg = RandomConfig {
        count: 100,
        train_steps: 777,
    };
    let (a, la) = run_random(&world, &RandomDesigns, &trainer, &cfg, 9).unwrap();
    let (b, _) = run_random(&world, &RandomDesigns, &trainer, &cfg, 9).unwrap();
    assert_eq!(a.len(), 100);
    assert_eq!(la.interactions, 100 * 777);
    let fa: Vec<f64> = a.iter().map(|i| i.fitness).collect();
    let fb: Vec<f64> = b.iter().map(|i| i.fitness).collect();
    assert_eq!(fa, fb);
    let _ = Classifier::new(fx.embedder.as_ref(), &fx.clusters);
}
