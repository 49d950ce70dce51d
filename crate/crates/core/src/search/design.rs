use std::sync::Arc;

use rand::Rng as _;

use crate::clustering::ClusterModel;
use crate::design_space::{DesignSpace, MorphologyGenome, MutationParams};
use crate::embedding::{raw_features, Embedder};
use crate::evaluation::{LearningCurveModel, NicheLandscape};
use crate::scalar::Scalar;
use crate::seed::Rng;

/// An embedding followed by a nearest-centroid lookup.
#[derive(Clone, Copy)]
pub struct Classifier<'a, F: Scalar> {
    pub embedder: &'a dyn Embedder<F>,
    pub clusters: &'a ClusterModel<F>,
}

impl<'a, F: Scalar> Classifier<'a, F> {
    pub fn new(embedder: &'a dyn Embedder<F>, clusters: &'a ClusterModel<F>) -> Self {
        assert_eq!(
            embedder.dim(),
            clusters.dim(),
            "embedding and centroids disagree on dimension"
        );
        Self { embedder, clusters }
    }

    pub fn k(&self) -> usize {
        self.clusters.k
    }

    pub fn classify(&self, space: &DesignSpace, g: &MorphologyGenome) -> usize {
        let s = space
            .serialize(g)
            .expect("genomes in a run fit the design space");
        self.clusters
            .assign(&self.embedder.embed(&s))
            .expect("dimension checked at construction")
    }
}

/// Everything a search needs to turn a genome into a scored design.
#[derive(Clone, Copy)]
pub struct World<'a, F: Scalar> {
    pub space: &'a DesignSpace,
    /// Latent classifier: its codes feed the shared evaluator and the
    /// metrics, its clusters are LOKI's niches.
    pub latent: Classifier<'a, F>,
    pub landscape: &'a NicheLandscape<F>,
    pub curve: LearningCurveModel,
}

/// A genome with its derived quantities cached.
#[derive(Debug, Clone)]
pub struct Design<F> {
    pub genome: Arc<MorphologyGenome>,
    pub code: Vec<F>,
    pub cluster: usize,
    /// `f∞`, the fully trained fitness.
    pub asymptotic: F,
    pub tau: F,
    /// Landscape niche that sets `f∞`.
    pub niche: usize,
}

impl<F> Design<F> {
    pub fn same_genome(&self, other: &Design<F>) -> bool {
        Arc::ptr_eq(&self.genome, &other.genome) || *self.genome == *other.genome
    }
}

impl<'a, F: Scalar> World<'a, F> {
    pub fn design(&self, genome: Arc<MorphologyGenome>) -> Design<F> {
        let s = self
            .space
            .serialize(&genome)
            .expect("genomes in a run fit the design space");
        let code = self.latent.embedder.embed(&s);
        let cluster = self
            .latent
            .clusters
            .assign(&code)
            .expect("dimension checked");
        let phi = self
            .landscape
            .project(&raw_features(&s, &self.space.schema));
        Design {
            asymptotic: self.landscape.fitness_at(&phi),
            niche: self.landscape.dominant_niche(&phi),
            tau: self.curve.tau(genome.limb_count()),
            code,
            cluster,
            genome,
        }
    }
}

/// Where searches draw new designs from.
pub trait DesignSource<F: Scalar>: Sync {
    fn draw(&self, world: &World<F>, rng: &mut Rng) -> Design<F>;

    /// A design in `cluster` passing `accept`, by rejection sampling with
    /// at most `cap` draws.
    fn draw_in_cluster(
        &self,
        world: &World<F>,
        cluster: usize,
        accept: &dyn Fn(&Design<F>) -> bool,
        cap: usize,
        rng: &mut Rng,
    ) -> Option<Design<F>> {
        for _ in 0..cap {
            let d = self.draw(world, rng);
            if d.cluster == cluster && accept(&d) {
                return Some(d);
            }
        }
        None
    }
}

/// Fresh samples from the design space's generator.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomDesigns;

impl<F: Scalar> DesignSource<F> for RandomDesigns {
    fn draw(&self, world: &World<F>, rng: &mut Rng) -> Design<F> {
        world.design(Arc::new(world.space.sample(rng)))
    }
}

/// A finite, pre-scored set of designs. In-cluster draws sample the
/// cluster's members directly instead of rejecting.
#[derive(Debug, Clone)]
pub struct DesignCatalog<F> {
    pub designs: Vec<Design<F>>,
    buckets: Vec<Vec<usize>>,
}

impl<F: Scalar> DesignCatalog<F> {
    pub fn new(world: &World<F>, genomes: impl IntoIterator<Item = MorphologyGenome>) -> Self {
        let designs: Vec<Design<F>> = genomes
            .into_iter()
            .map(|g| world.design(Arc::new(g)))
            .collect();
        let mut buckets = vec![Vec::new(); world.latent.k()];
        for (i, d) in designs.iter().enumerate() {
            buckets[d.cluster].push(i);
        }
        Self { designs, buckets }
    }

    pub fn bucket(&self, cluster: usize) -> &[usize] {
        &self.buckets[cluster]
    }
}

impl<F: Scalar> DesignSource<F> for DesignCatalog<F> {
    fn draw(&self, _world: &World<F>, rng: &mut Rng) -> Design<F> {
        self.designs[rng.random_range(0..self.designs.len())].clone()
    }

    fn draw_in_cluster(
        &self,
        _world: &World<F>,
        cluster: usize,
        accept: &dyn Fn(&Design<F>) -> bool,
        cap: usize,
        rng: &mut Rng,
    ) -> Option<Design<F>> {
        let bucket = self.buckets.get(cluster)?;
        if bucket.is_empty() {
            return None;
        }
        for _ in 0..cap {
            let d = &self.designs[bucket[rng.random_range(0..bucket.len())]];
            if accept(d) {
                return Some(d.clone());
            }
        }
        None
    }
}

/// How baselines derive a child from a parent.
pub trait Variation<F: Scalar>: Sync {
    fn vary(&self, parent: &Design<F>, world: &World<F>, rng: &mut Rng) -> Design<F>;
}

impl<F: Scalar> Variation<F> for MutationParams {
    fn vary(&self, parent: &Design<F>, world: &World<F>, rng: &mut Rng) -> Design<F> {
        let child = world.space.mutate(&parent.genome, self, rng).genome;
        world.design(Arc::new(child))
    }
}
