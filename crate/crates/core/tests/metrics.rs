mod common;

use common::oracles;
use proptest::prelude::*;
use qdc::metrics::{coverage, max_fitness, qd_score, sparseness};
use qdc::seed::rng_from_seed;
use rand::Rng;

struct Pop {
    fitness: Vec<f64>,
    labels: Vec<usize>,
    codes: Vec<Vec<f64>>,
    n_clusters: usize,
}

fn random_pop(rng: &mut impl Rng) -> Pop {
    let n = rng.random_range(1..=50);
    let n_clusters = rng.random_range(1..=8);
    let dim = rng.random_range(1..=4);
    // coarse values so ties and duplicate points actually occur
    Pop {
        fitness: (0..n)
            .map(|_| rng.random_range(-20..20) as f64 / 4.0)
            .collect(),
        labels: (0..n).map(|_| rng.random_range(0..n_clusters)).collect(),
        codes: (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| rng.random_range(-3..4) as f64 * 0.5)
                    .collect()
            })
            .collect(),
        n_clusters,
    }
}

#[test]
fn metrics_agree_with_brute_force() {
    let mut rng = rng_from_seed(2024);
    for _ in 0..200 {
        let p = random_pop(&mut rng);
        let q = qd_score(&p.fitness, &p.labels, p.n_clusters).unwrap();
        assert!((q - oracles::qd(&p.fitness, &p.labels, p.n_clusters)).abs() <= 1e-9);
        let c: f64 = coverage(&p.labels, p.n_clusters);
        assert!((c - oracles::coverage(&p.labels, p.n_clusters)).abs() <= 1e-9);
        assert!((max_fitness(&p.fitness).unwrap() - oracles::max(&p.fitness)).abs() <= 1e-9);
        if p.codes.len() > 1 {
            let k = rng.random_range(1..p.codes.len()).min(5);
            let (per, mean) = sparseness(&p.codes, k).unwrap();
            let want = oracles::sparseness(&p.codes, k);
            for (a, b) in per.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-9);
            }
            assert!((mean - want.iter().sum::<f64>() / want.len() as f64).abs() <= 1e-9);
        }
    }
}

#[test]
fn sparseness_matches_brute_force_on_500_points() {
    let mut rng = rng_from_seed(5);
    let pts: Vec<Vec<f64>> = (0..500)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let (per, _) = sparseness(&pts, 10).unwrap();
    for (a, b) in per.iter().zip(oracles::sparseness(&pts, 10)) {
        assert!((a - b).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn qd_stays_in_unit_interval(
        entries in prop::collection::vec((-100.0f64..100.0, 0usize..8), 1..60),
        n_clusters in 8usize..12,
    ) {
        let (f, l): (Vec<f64>, Vec<usize>) = entries.into_iter().unzip();
        let q = qd_score(&f, &l, n_clusters).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
    }

    #[test]
    fn equal_bests_score_occupancy(value in -5.0f64..5.0, occupied in 1usize..8) {
        let f = vec![value; occupied];
        let l: Vec<usize> = (0..occupied).collect();
        prop_assert_eq!(qd_score(&f, &l, 8).unwrap(), occupied as f64 / 8.0);
    }

    #[test]
    fn sparseness_scales_with_the_codes(
        pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 4..30),
        c in 0.1f64..10.0,
    ) {
        let (base, _) = sparseness(&pts, 3).unwrap();
        let doubled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x * 2.0).collect()).collect();
        let (twice, _) = sparseness(&doubled, 3).unwrap();
        for (a, b) in base.iter().zip(&twice) {
            prop_assert_eq!(a * 2.0, *b);
        }
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x * c).collect()).collect();
        let (s, _) = sparseness(&scaled, 3).unwrap();
        for (a, b) in base.iter().zip(&s) {
            prop_assert!((a * c - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
