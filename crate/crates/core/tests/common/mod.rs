#![allow(dead_code)]

pub mod oracles;

use qdc::clustering::{kmeans_fit, ClusterModel, FeatureSpace};
use qdc::design_space::{DesignSpace, RowScope, SerializedGenome};
use qdc::embedding::{Embedder, VaeConfig, VaeModel};
use qdc::evaluation::{deceptive_spec, DeceptiveParams, LearningCurveModel, NicheLandscape};
use qdc::search::{Classifier, World};
use qdc::seed::rng_from_seed;

/// One-dimensional code: the head's first continuous attribute, which the
/// generator draws uniformly. Gives balanced clusters cheaply.
pub struct HeadEmbedder {
    pub column: usize,
}

impl HeadEmbedder {
    pub fn new(space: &DesignSpace) -> Self {
        Self {
            column: space.schema.layout(RowScope::Head).continuous[0],
        }
    }
}

impl Embedder<f64> for HeadEmbedder {
    fn dim(&self) -> usize {
        1
    }

    fn embed(&self, s: &SerializedGenome) -> Vec<f64> {
        vec![s.at(0, self.column)]
    }
}

/// `k` evenly spaced 1-D centroids over `[lo, hi]`.
pub fn strip_clusters(k: usize, lo: f64, hi: f64) -> ClusterModel<f64> {
    ClusterModel {
        k,
        feature_space: FeatureSpace::Latent,
        centroids: (0..k)
            .map(|i| vec![lo + (hi - lo) * (i as f64 + 0.5) / k as f64])
            .collect(),
        seed: 0,
        inertia_history: Vec::new(),
    }
}

pub fn landscape(space: &DesignSpace, seed: u64) -> NicheLandscape<f64> {
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

/// Owns everything a `World` borrows.
pub struct Fixture {
    pub space: DesignSpace,
    pub embedder: Box<dyn Embedder<f64>>,
    pub clusters: ClusterModel<f64>,
    pub landscape: NicheLandscape<f64>,
    pub curve: LearningCurveModel,
}

impl Fixture {
    pub fn strips(k: usize) -> Self {
        let space = DesignSpace::default();
        let embedder = Box::new(HeadEmbedder::new(&space));
        let (lo, hi) = space.schema.bounds(embedder.column).unwrap();
        Self {
            landscape: landscape(&space, 1),
            clusters: strip_clusters(k, lo, hi),
            embedder,
            space,
            curve: LearningCurveModel::default(),
        }
    }

    /// Untrained small VAE with k-means on its codes.
    pub fn latent(k: usize, seed: u64) -> Self {
        let space = DesignSpace::default();
        let cfg = VaeConfig {
            latent_dim: 4,
            hidden_width: 8,
            seed,
            ..VaeConfig::default()
        };
        let vae: VaeModel<f64> = VaeModel::untrained(&space.schema, space.rows(), &cfg);
        let mut rng = rng_from_seed(seed);
        let codes: Vec<Vec<f64>> = (0..600)
            .map(|_| vae.embed(&space.serialize(&space.sample(&mut rng)).unwrap()))
            .collect();
        let clusters = kmeans_fit(&codes, k, seed, 100, FeatureSpace::Latent).unwrap();
        Self {
            landscape: landscape(&space, seed),
            clusters,
            embedder: Box::new(vae),
            space,
            curve: LearningCurveModel::default(),
        }
    }

    pub fn world(&self) -> World<'_, f64> {
        World {
            space: &self.space,
            latent: Classifier::new(self.embedder.as_ref(), &self.clusters),
            landscape: &self.landscape,
            curve: self.curve,
        }
    }
}
