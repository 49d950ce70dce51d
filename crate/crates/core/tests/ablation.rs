use qdc::clustering::{adjusted_rand_index, kmeans_fit, FeatureSpace};
use qdc::design_space::{
    depth_class, DesignSpace, DesignSpaceConfig, LimbCountDistribution, MorphologyGenome, RowScope,
    SerializedGenome,
};
use qdc::embedding::{raw_features, train_vae, VaeConfig, VaeModel};
use qdc::seed::rng_from_seed;
use rand::Rng;
use rand_distr::StandardNormal;

const LIMBS: usize = 4;

/// Re-hangs the limbs of `g` as a chain or as a star and fixes the
/// depth-derived attribute to match.
fn with_topology(space: &DesignSpace, g: &MorphologyGenome, chain: bool) -> MorphologyGenome {
    let mut g = g.clone();
    let layout = space.schema.layout(RowScope::Limb);
    let (slot, col) = layout
        .categorical
        .iter()
        .enumerate()
        .find(|(_, &c)| space.schema.attribute(c).tree_depth)
        .map(|(i, &c)| (i, c))
        .unwrap();
    let card = space.schema.cardinality(col).unwrap();
    for (j, limb) in g.limbs.iter_mut().enumerate() {
        limb.parent = if chain { j } else { 0 };
        let depth = if chain { j + 1 } else { 1 };
        limb.part.categorical[slot] = depth_class(depth, card);
    }
    g
}

fn jitter(
    space: &DesignSpace,
    g: &MorphologyGenome,
    sd: f64,
    rng: &mut impl Rng,
) -> MorphologyGenome {
    let mut g = g.clone();
    let mut nudge = |values: &mut Vec<f64>, scope| {
        let cols = &space.schema.layout(scope).continuous;
        for (v, &c) in values.iter_mut().zip(cols) {
            let (lo, hi) = space.schema.bounds(c).unwrap();
            let z: f64 = rng.sample(StandardNormal);
            *v = (*v + sd * (hi - lo) * z).clamp(lo, hi);
        }
    };
    nudge(&mut g.head.continuous, RowScope::Head);
    for l in &mut g.limbs {
        nudge(&mut l.part.continuous, RowScope::Limb);
    }
    g
}

fn shift_params(space: &DesignSpace, g: &MorphologyGenome, delta: f64) -> MorphologyGenome {
    let mut g = g.clone();
    let cols = &space.schema.layout(RowScope::Limb).continuous;
    for l in &mut g.limbs {
        for (v, &c) in l.part.continuous.iter_mut().zip(cols) {
            let (lo, hi) = space.schema.bounds(c).unwrap();
            let d = delta * (hi - lo);
            *v = if *v + d <= hi { *v + d } else { *v - d };
        }
    }
    g
}

/// Two topologies crossed with two parameter styles. The style shift moves
/// every continuous limb parameter, so in raw feature space it outweighs the
/// single depth column that tells a chain from a star.
fn topology_dataset(space: &DesignSpace, seed: u64) -> (Vec<SerializedGenome>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let base = space.sample(&mut rng);
    let styles = [base.clone(), shift_params(space, &base, 0.12)];
    let mut genomes = Vec::new();
    let mut truth = Vec::new();
    for i in 0..400 {
        let chain = i % 2 == 0;
        let g = jitter(space, &styles[(i / 2) % 2], 0.02, &mut rng);
        let g = with_topology(space, &g, chain);
        assert!(space.validate(&g).is_empty());
        genomes.push(space.serialize(&g).unwrap());
        truth.push(usize::from(chain));
    }
    (genomes, truth)
}

fn topology_agreement(space: &DesignSpace, seed: u64) -> (f64, f64) {
    let (genomes, truth) = topology_dataset(space, seed);
    let cfg = VaeConfig {
        latent_dim: 6,
        hidden_width: 32,
        epochs: 30,
        batch_size: 32,
        learning_rate: 0.05,
        ..VaeConfig::default()
    };
    let vae: VaeModel<f64> = train_vae(&genomes, &space.schema, &cfg).unwrap();
    let latent: Vec<Vec<f64>> = genomes.iter().map(|s| vae.encode(s).unwrap()).collect();
    let raw: Vec<Vec<f64>> = genomes
        .iter()
        .map(|s| raw_features(s, &space.schema))
        .collect();
    let fit = |pts: &[Vec<f64>], fs| {
        let m = kmeans_fit(pts, 2, 5, 300, fs).unwrap();
        let labels: Vec<usize> = pts.iter().map(|p| m.assign(p).unwrap()).collect();
        adjusted_rand_index(&labels, &truth)
    };
    (
        fit(&latent, FeatureSpace::Latent),
        fit(&raw, FeatureSpace::Raw),
    )
}

#[test]
fn latent_clusters_separate_topologies_better_than_raw() {
    let space = DesignSpace {
        config: DesignSpaceConfig {
            l_max: 6,
            limb_count: LimbCountDistribution::Fixed { count: LIMBS },
        },
        ..DesignSpace::default()
    };
    let seeds = 1..=10u64;
    let mut latent_sum = 0.0;
    let mut raw_sum = 0.0;
    let mut wins = 0;
    for seed in seeds.clone() {
        let (latent, raw) = topology_agreement(&space, seed);
        println!("seed {seed}: ARI latent {latent:.3} raw {raw:.3}");
        latent_sum += latent;
        raw_sum += raw;
        wins += usize::from(latent > raw + 0.1);
    }
    let n = seeds.count() as f64;
    let (latent_mean, raw_mean) = (latent_sum / n, raw_sum / n);
    // Declared thresholds: latent ahead by 0.25 mean ARI and clearly ahead on
    // at least half of the datasets.
    assert!(
        latent_mean > raw_mean + 0.25,
        "latent {latent_mean:.3} raw {raw_mean:.3}"
    );
    assert!(wins >= 5, "latent ahead on {wins}/10 datasets");
}
