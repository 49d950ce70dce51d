//! K-means niching of the design space.

use std::cmp::Ordering;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::scalar::{squared_distance, Scalar};
use crate::seed::rng_from_seed;

pub const DEFAULT_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSpace {
    Latent,
    Raw,
}

impl std::str::FromStr for FeatureSpace {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "latent" => Ok(Self::Latent),
            "raw" => Ok(Self::Raw),
            other => Err(format!("unknown feature space `{other}` (latent|raw)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("no points to cluster")]
    Empty,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("only {distinct} distinct points for k = {k}")]
    DegenerateInput { distinct: usize, k: usize },
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ClusterModel<F> {
    pub k: usize,
    pub feature_space: FeatureSpace,
    pub centroids: Vec<Vec<F>>,
    pub seed: u64,
    /// Inertia after every assignment step, first entry from the seeding.
    #[serde(default)]
    pub inertia_history: Vec<F>,
}

impl<F: Scalar> ClusterModel<F> {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn assign(&self, point: &[F]) -> Result<usize, ClusterError> {
        if point.len() != self.dim() {
            return Err(ClusterError::DimensionMismatch {
                got: point.len(),
                expected: self.dim(),
            });
        }
        Ok(nearest(&self.centroids, point).0)
    }

    /// Sum of squared distances of `points` to their assigned centroids.
    pub fn inertia(&self, points: &[Vec<F>]) -> Result<F, ClusterError> {
        let mut total = F::zero();
        for p in points {
            let c = self.assign(p)?;
            total = total + squared_distance(p, &self.centroids[c]);
        }
        Ok(total)
    }
}

fn nearest<F: Scalar>(centroids: &[Vec<F>], p: &[F]) -> (usize, F) {
    let mut best = (0, F::infinity());
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn cmp_points<F: Scalar>(a: &[F], b: &[F]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.to_f64_lossy().total_cmp(&y.to_f64_lossy()))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

pub fn count_distinct<F: Scalar>(points: &[Vec<F>]) -> usize {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| cmp_points(&points[a], &points[b]));
    idx.dedup_by(|a, b| cmp_points(&points[*a], &points[*b]).is_eq());
    idx.len()
}

fn plus_plus_init<F: Scalar>(points: &[Vec<F>], k: usize, seed: u64) -> Vec<Vec<F>> {
    let mut rng = rng_from_seed(seed);
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]).to_f64_lossy())
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut pick = None;
        if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
        }
        let i = pick.expect("enough distinct points were checked up front");
        centroids.push(points[i].clone());
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(squared_distance(p, &centroids[centroids.len() - 1]).to_f64_lossy());
        }
    }
    centroids
}

fn labelled_inertia<F: Scalar>(points: &[Vec<F>], labels: &[usize], centroids: &[Vec<F>]) -> F {
    points.iter().zip(labels).fold(F::zero(), |acc, (p, &l)| {
        acc + squared_distance(p, &centroids[l])
    })
}

/// Means of the labelled points. An empty cluster is moved onto the point
/// farthest from its own centroid, which then joins that cluster.
fn update<F: Scalar>(points: &[Vec<F>], labels: &mut [usize], centroids: &[Vec<F>]) -> Vec<Vec<F>> {
    let k = centroids.len();
    let dim = centroids[0].len();
    let mut sums = vec![vec![F::zero(); dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels.iter()) {
        counts[l] += 1;
        for (s, &x) in sums[l].iter_mut().zip(p) {
            *s = *s + x;
        }
    }
    let mut next: Vec<Vec<F>> = sums
        .into_iter()
        .zip(&counts)
        .zip(centroids)
        .map(|((s, &n), old)| {
            if n == 0 {
                old.clone()
            } else {
                let n = F::of_usize(n);
                s.into_iter().map(|v| v / n).collect()
            }
        })
        .collect();
    let empties: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    for empty in empties {
        let far = points
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[labels[*i]] > 1)
            .map(|(i, p)| (i, squared_distance(p, &next[labels[i]])))
            .fold(None, |best: Option<(usize, F)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = far {
            counts[labels[i]] -= 1;
            labels[i] = empty;
            counts[empty] = 1;
            next[empty] = points[i].clone();
        }
    }
    next
}

/// Seeded k-means: k-means++ seeding, then Lloyd iterations until the
/// assignment stops changing or `max_iters` updates have run.
pub fn kmeans_fit<F: Scalar>(
    points: &[Vec<F>],
    k: usize,
    seed: u64,
    max_iters: usize,
    feature_space: FeatureSpace,
) -> Result<ClusterModel<F>, ClusterError> {
    if points.is_empty() {
        return Err(ClusterError::Empty);
    }
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(ClusterError::DimensionMismatch {
            got: p.len(),
            expected: dim,
        });
    }
    let distinct = count_distinct(points);
    if distinct < k {
        return Err(ClusterError::DegenerateInput { distinct, k });
    }

    let mut centroids = plus_plus_init(points, k, seed);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(&centroids, p).0).collect();
    let mut current = labelled_inertia(points, &labels, &centroids);
    let mut history = vec![current];

    for _ in 0..max_iters {
        let mut next_labels = labels.clone();
        let next = update(points, &mut next_labels, &centroids);
        // Keep the old centroids if rounding made the update worse.
        if labelled_inertia(points, &next_labels, &next) <= current {
            centroids = next;
            labels = next_labels;
        }
        let reassigned: Vec<usize> = points.iter().map(|p| nearest(&centroids, p).0).collect();
        let changed = reassigned != labels;
        labels = reassigned;
        current = labelled_inertia(points, &labels, &centroids);
        history.push(current);
        if !changed {
            break;
        }
    }
    log::debug!(
        "k-means k={k}: {} steps, inertia {}",
        history.len(),
        current.to_f64_lossy()
    );
    Ok(ClusterModel {
        k,
        feature_space,
        centroids,
        seed,
        inertia_history: history,
    })
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
