mod common;

use common::oracles::spearman;
use qdc::design_space::DesignSpace;
use qdc::evaluation::{
    deceptive_spec, flops_per_morphology, searched_morphologies, steps_for_iteration,
    total_interactions, BudgetLedger, DeceptiveParams, FlopsModel, LearningCurveModel,
    NicheLandscape, SharedEvaluator,
};
use qdc::search::LokiConfig;
use qdc::seed::rng_from_seed;

fn landscape(space: &DesignSpace, seed: u64) -> NicheLandscape<f64> {
    let params = DeceptiveParams {
        probe_designs: 500,
        ..DeceptiveParams::default()
    };
    NicheLandscape::from_spec(
        deceptive_spec(space, seed, &params),
        space.rows() * space.cols(),
    )
    .unwrap()
}

#[test]
fn fitness_is_the_max_over_niches() {
    let space = DesignSpace::default();
    let l = landscape(&space, 2);
    let mut rng = rng_from_seed(9);
    for _ in 0..100 {
        let g = space.sample(&mut rng);
        let phi = l.features(&space, &g).unwrap();
        let mut want: f64 = 0.0;
        for n in &l.spec.niches {
            let d2: f64 = phi
                .iter()
                .zip(&n.center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            want = want.max(n.height * (-d2 / (2.0 * n.width * n.width)).exp());
        }
        assert!((l.true_fitness(&space, &g).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn default_schedule_accounting() {
    let cfg = LokiConfig::default();
    assert_eq!(total_interactions(&cfg), 4_624_640_000);
    let s = searched_morphologies(&cfg);
    assert_eq!(s.sampled_per_cluster, 78_080);
    assert_eq!(s.total_sampled, 3_123_200);
    assert_eq!(s.per_cluster, 78_100);
    let steps: u64 = (1..=cfg.n_iter)
        .map(|i| steps_for_iteration(cfg.per_cluster_budget, cfg.n_iter, i))
        .sum();
    assert_eq!(steps, 100_000_000);
}

#[test]
fn flops_per_design_rows() {
    let mlp = flops_per_morphology(&FlopsModel::mlp()).unwrap();
    assert!((mlp / 1.594e11 - 1.0).abs() < 0.005, "{mlp}");
    let tf = flops_per_morphology(&FlopsModel::transformer()).unwrap();
    assert!((tf / 1.019e11 - 1.0).abs() < 0.005, "{tf}");
}

/// Fixed budgets rank designs differently depending on how long they train:
/// short budgets favour the few-limb designs that learn fast.
#[test]
fn short_and_long_budgets_pick_different_designs() {
    let space = DesignSpace::default();
    let l = landscape(&space, 4);
    let curve = LearningCurveModel::default().noiseless();
    assert!(curve.kappa > 0.0);
    let mut rng = rng_from_seed(21);
    let t_large = 2.0e5;
    let t_small = 0.05 * t_large;
    let mut small = Vec::new();
    let mut large = Vec::new();
    for _ in 0..200 {
        let g = space.sample(&mut rng);
        let f = l.true_fitness(&space, &g).unwrap();
        let tau: f64 = curve.tau(g.limb_count());
        small.push(curve.expected(f, tau, t_small));
        large.push(curve.expected(f, tau, t_large));
    }
    let top = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        idx.truncate(10);
        idx
    };
    let (a, b) = (top(&small), top(&large));
    let overlap = a.iter().filter(|i| b.contains(i)).count();
    let rho = spearman(&small, &large);
    assert!(overlap < 10, "overlap {overlap}");
    assert!(rho < 1.0, "spearman {rho}");
}

#[test]
fn evaluator_progress_matches_the_cluster_budget() {
    let cfg = LokiConfig::default();
    let mut ev = SharedEvaluator::new(0, vec![vec![0.0f64; 3]], 1.0);
    let mut ledger = BudgetLedger::default();
    for i in 1..=cfg.n_iter {
        let before = ledger.interactions;
        let steps = steps_for_iteration(cfg.per_cluster_budget, cfg.n_iter, i);
        ev.train(vec![vec![0.0; 3]], steps, &mut ledger);
        assert_eq!(ledger.interactions - before, steps);
    }
    assert_eq!(ev.progress, 100_000_000);
    let json = serde_json::to_string(&ledger).unwrap();
    assert_eq!(serde_json::from_str::<BudgetLedger>(&json).unwrap(), ledger);
}
