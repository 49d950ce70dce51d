use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design_space::{DesignSpace, MorphologyGenome, SerialError};
use crate::embedding::raw_features;
use crate::scalar::{squared_distance, Scalar};
use crate::seed::{rng_from_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NicheSpec {
    pub center: Vec<f64>,
    pub height: f64,
    pub width: f64,
}

/// On-disk description of a landscape. The projection matrix is not stored;
/// it is regenerated from `projection_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub seed: u64,
    pub d: usize,
    pub niches: Vec<NicheSpec>,
    pub projection_seed: u64,
    #[serde(default)]
    pub deceptive: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LandscapeError {
    #[error("a landscape needs at least two niches, got {0}")]
    TooFewNiches(usize),
    #[error("niche {0} has a non-positive height or width")]
    BadNiche(usize),
    #[error("niche {index} center has dimension {got}, expected {expected}")]
    CenterDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error(transparent)]
    Serial(#[from] SerialError),
}

/// Knobs of the deceptive preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeceptiveParams {
    #[serde(default = "d_dim")]
    pub d: usize,
    #[serde(default = "d_high")]
    pub high_niches: usize,
    #[serde(default = "d_low_height")]
    pub low_height: f64,
    #[serde(default = "d_high_height")]
    pub high_height: f64,
    /// Widths as fractions of the typical spread of projected designs.
    #[serde(default = "d_low_width")]
    pub low_width: f64,
    #[serde(default = "d_high_width")]
    pub high_width: f64,
    /// High niches are centred on designs with at least this many limbs.
    #[serde(default = "d_min_limbs")]
    pub high_min_limbs: usize,
    #[serde(default = "d_probe")]
    pub probe_designs: usize,
}

fn d_dim() -> usize {
    6
}
fn d_high() -> usize {
    6
}
fn d_low_height() -> f64 {
    0.5
}
fn d_high_height() -> f64 {
    1.0
}
fn d_low_width() -> f64 {
    0.6
}
fn d_high_width() -> f64 {
    0.35
}
fn d_min_limbs() -> usize {
    5
}
fn d_probe() -> usize {
    2000
}

impl Default for DeceptiveParams {
    fn default() -> Self {
        Self {
            d: d_dim(),
            high_niches: d_high(),
            low_height: d_low_height(),
            high_height: d_high_height(),
            low_width: d_low_width(),
            high_width: d_high_width(),
            high_min_limbs: d_min_limbs(),
            probe_designs: d_probe(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Niche<F> {
    pub center: Vec<F>,
    pub height: F,
    pub width: F,
}

/// Max-of-Gaussians fitness over a fixed random projection of the raw
/// design features.
#[derive(Debug, Clone, PartialEq)]
pub struct NicheLandscape<F> {
    pub spec: LandscapeSpec,
    input_dim: usize,
    /// Row-major `d × input_dim`.
    projection: Vec<F>,
    pub niches: Vec<Niche<F>>,
}

fn projection_matrix<F: Scalar>(d: usize, input_dim: usize, seed: u64) -> Vec<F> {
    let mut rng = rng_from_seed(seed);
    let scale = 1.0 / (input_dim as f64).sqrt();
    (0..d * input_dim)
        .map(|_| F::of(rng.sample::<f64, _>(StandardNormal) * scale))
        .collect()
}

impl<F: Scalar> NicheLandscape<F> {
    pub fn from_spec(spec: LandscapeSpec, input_dim: usize) -> Result<Self, LandscapeError> {
        if spec.niches.len() < 2 {
            return Err(LandscapeError::TooFewNiches(spec.niches.len()));
        }
        let mut niches = Vec::with_capacity(spec.niches.len());
        for (index, n) in spec.niches.iter().enumerate() {
            if !(n.height > 0.0 && n.width > 0.0) {
                return Err(LandscapeError::BadNiche(index));
            }
            if n.center.len() != spec.d {
                return Err(LandscapeError::CenterDimension {
                    index,
                    got: n.center.len(),
                    expected: spec.d,
                });
            }
            niches.push(Niche {
                center: n.center.iter().map(|&c| F::of(c)).collect(),
                height: F::of(n.height),
                width: F::of(n.width),
            });
        }
        Ok(Self {
            projection: projection_matrix(spec.d, input_dim, spec.projection_seed),
            input_dim,
            niches,
            spec,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Projected features of a raw feature vector.
    pub fn project(&self, raw: &[F]) -> Vec<F> {
        debug_assert_eq!(raw.len(), self.input_dim);
        self.projection
            .chunks(self.input_dim)
            .map(|row| {
                row.iter().zip(raw).fold(
                    F::zero(),
                    |acc, (&w, &x)| if x == F::zero() { acc } else { acc + w * x },
                )
            })
            .collect()
    }

    pub fn features(
        &self,
        space: &DesignSpace,
        g: &MorphologyGenome,
    ) -> Result<Vec<F>, SerialError> {
        let s = space.serialize(g)?;
        Ok(self.project(&raw_features(&s, &space.schema)))
    }

    /// Value of each niche bump at `phi`.
    pub fn bumps(&self, phi: &[F]) -> Vec<F> {
        let two = F::of(2.0);
        self.niches
            .iter()
            .map(|n| {
                n.height * (-squared_distance(phi, &n.center) / (two * n.width * n.width)).exp()
            })
            .collect()
    }

    pub fn fitness_at(&self, phi: &[F]) -> F {
        self.bumps(phi).into_iter().fold(F::zero(), F::max)
    }

    /// Index of the bump that sets the fitness at `phi`; ties go low.
    pub fn dominant_niche(&self, phi: &[F]) -> usize {
        let b = self.bumps(phi);
        (0..b.len()).fold(0, |best, j| if b[j] > b[best] { j } else { best })
    }

    /// Asymptotic fitness of a design.
    pub fn true_fitness(
        &self,
        space: &DesignSpace,
        g: &MorphologyGenome,
    ) -> Result<F, SerialError> {
        Ok(self.fitness_at(&self.features(space, g)?))
    }

    pub fn max_height(&self) -> F {
        self.niches.iter().map(|n| n.height).fold(F::zero(), F::max)
    }
}

/// The deceptive preset: one broad low bump where few-limb designs
/// project, and narrow high bumps centred on many-limb designs.
pub fn deceptive_spec(space: &DesignSpace, seed: u64, params: &DeceptiveParams) -> LandscapeSpec {
    let input_dim = space.rows() * space.cols();
    let projection_seed = crate::seed::derive_seed(seed, "landscape-projection", 0);
    let projection: Vec<f64> = projection_matrix(params.d, input_dim, projection_seed);
    let project = |g: &MorphologyGenome| -> Vec<f64> {
        let s = space.serialize(g).expect("sampled designs serialize");
        let raw: Vec<f64> = raw_features(&s, &space.schema);
        projection
            .chunks(input_dim)
            .map(|row| row.iter().zip(&raw).map(|(w, x)| w * x).sum())
            .collect()
    };
    let mut rng = stream(seed, "landscape-probe", 0);
    let probes: Vec<(usize, Vec<f64>)> = (0..params.probe_designs.max(2))
        .map(|_| {
            let g = space.sample(&mut rng);
            (g.limb_count(), project(&g))
        })
        .collect();
    let dim = params.d;
    let mean = |pts: &[&Vec<f64>]| -> Vec<f64> {
        (0..dim)
            .map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / pts.len().max(1) as f64)
            .collect()
    };
    let all: Vec<&Vec<f64>> = probes.iter().map(|(_, p)| p).collect();
    let centre = mean(&all);
    let spread = (all
        .iter()
        .map(|p| squared_distance(p, &centre))
        .sum::<f64>()
        / all.len() as f64)
        .sqrt();

    let low: Vec<&Vec<f64>> = probes
        .iter()
        .filter(|(n, _)| *n <= 1)
        .map(|(_, p)| p)
        .collect();
    let low_center = if low.is_empty() {
        vec![0.0; dim]
    } else {
        mean(&low)
    };
    let mut niches = vec![NicheSpec {
        center: low_center,
        height: params.low_height,
        width: params.low_width * spread,
    }];
    let mut many: Vec<&Vec<f64>> = probes
        .iter()
        .filter(|(n, _)| *n >= params.high_min_limbs)
        .map(|(_, p)| p)
        .collect();
    if many.is_empty() {
        many = all.clone();
    }
    for j in 0..params.high_niches.max(1) {
        let pick = rng.random_range(0..many.len());
        let height = params.high_height * (1.0 - 0.05 * j as f64);
        niches.push(NicheSpec {
            center: many[pick].clone(),
            height,
            width: params.high_width * spread,
        });
    }
    LandscapeSpec {
        seed,
        d: dim,
        niches,
        projection_seed,
        deceptive: true,
    }
}
