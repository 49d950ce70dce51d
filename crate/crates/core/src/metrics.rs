//! Quality-diversity metrics over final populations, and the comparison
//! report built from them.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterError;
use crate::design_space::{DesignSpace, MorphologyGenome};
use crate::scalar::{distance, Scalar};
use crate::search::Classifier;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("sparseness needs more than {k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("cluster id {id} out of range for {n_clusters} clusters")]
    ClusterOutOfRange { id: usize, n_clusters: usize },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

#[derive(Debug, Clone)]
pub struct ScoredEntry<F> {
    pub genome: Arc<MorphologyGenome>,
    pub code: Vec<F>,
    /// Mean fitness over the evaluation seeds.
    pub fitness: F,
    pub cluster: usize,
}

#[derive(Debug, Clone)]
pub struct ScoredPopulation<F> {
    pub entries: Vec<ScoredEntry<F>>,
    pub n_clusters: usize,
}

impl<F: Scalar> ScoredPopulation<F> {
    pub fn fitness(&self) -> Vec<F> {
        self.entries.iter().map(|e| e.fitness).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.cluster).collect()
    }

    pub fn codes(&self) -> Vec<Vec<F>> {
        self.entries.iter().map(|e| e.code.clone()).collect()
    }
}

/// Encodes and classifies each genome, attaching the given fitness.
pub fn assign_population<F: Scalar>(
    space: &DesignSpace,
    classifier: &Classifier<F>,
    population: impl IntoIterator<Item = (Arc<MorphologyGenome>, F)>,
) -> Result<ScoredPopulation<F>, MetricsError> {
    let mut entries = Vec::new();
    for (genome, fitness) in population {
        let s = space
            .serialize(&genome)
            .map_err(|_| ClusterError::DimensionMismatch {
                got: genome.limb_count(),
                expected: space.l_max(),
            })?;
        let code = classifier.embedder.embed(&s);
        let cluster = classifier.clusters.assign(&code)?;
        entries.push(ScoredEntry {
            genome,
            code,
            fitness,
            cluster,
        });
    }
    Ok(ScoredPopulation {
        entries,
        n_clusters: classifier.k(),
    })
}

/// Best fitness per cluster, `None` for empty clusters.
pub fn cluster_bests<F: Scalar>(
    fitness: &[F],
    labels: &[usize],
    n_clusters: usize,
) -> Result<Vec<Option<F>>, MetricsError> {
    let mut best: Vec<Option<F>> = vec![None; n_clusters];
    for (&f, &c) in fitness.iter().zip(labels) {
        let slot = best
            .get_mut(c)
            .ok_or(MetricsError::ClusterOutOfRange { id: c, n_clusters })?;
        *slot = Some(match *slot {
            Some(b) if b >= f => b,
            _ => f,
        });
    }
    Ok(best)
}

/// Normalised QD-score in `[0, 1]`. Each occupied cluster contributes its
/// best fitness min-max scaled over the occupied bests; when those bests
/// are all equal every occupied cluster contributes 1.
pub fn qd_score<F: Scalar>(
    fitness: &[F],
    labels: &[usize],
    n_clusters: usize,
) -> Result<F, MetricsError> {
    if n_clusters == 0 || fitness.is_empty() {
        return Ok(F::zero());
    }
    let bests: Vec<F> = cluster_bests(fitness, labels, n_clusters)?
        .into_iter()
        .flatten()
        .collect();
    let lo = bests.iter().copied().fold(F::infinity(), F::min);
    let hi = bests.iter().copied().fold(F::neg_infinity(), F::max);
    let total: F = if hi == lo {
        F::of_usize(bests.len())
    } else {
        bests.iter().map(|&b| (b - lo) / (hi - lo)).sum()
    };
    Ok(total / F::of_usize(n_clusters))
}

/// Percentage of clusters holding at least one member.
pub fn coverage<F: Scalar>(labels: &[usize], n_clusters: usize) -> F {
    if n_clusters == 0 {
        return F::zero();
    }
    let mut seen = vec![false; n_clusters];
    for &c in labels {
        if c < n_clusters {
            seen[c] = true;
        }
    }
    F::of(100.0) * F::of_usize(seen.iter().filter(|&&s| s).count()) / F::of_usize(n_clusters)
}

pub fn max_fitness<F: Scalar>(fitness: &[F]) -> Result<F, MetricsError> {
    fitness
        .iter()
        .copied()
        .reduce(F::max)
        .ok_or(MetricsError::EmptyPopulation)
}

/// Mean distance to the `k` nearest other points, per point and averaged.
pub fn sparseness<F: Scalar>(codes: &[Vec<F>], k: usize) -> Result<(Vec<F>, F), MetricsError> {
    let n = codes.len();
    if k == 0 || k >= n {
        return Err(MetricsError::TooFewPoints { n, k });
    }
    let per: Vec<F> = (0..n)
        .map(|i| {
            let mut d: Vec<F> = (0..n)
                .filter(|&j| j != i)
                .map(|j| distance(&codes[i], &codes[j]))
                .collect();
            d.select_nth_unstable_by(k - 1, |a, b| {
                a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
            });
            d.truncate(k);
            d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            d.into_iter().sum::<F>() / F::of_usize(k)
        })
        .collect();
    let mean = per.iter().copied().sum::<F>() / F::of_usize(n);
    Ok((per, mean))
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub algo: String,
    pub seed: u64,
    pub max_fitness: f64,
    pub qd_score_x100: f64,
    pub coverage_pct: f64,
    pub sparseness_mean: f64,
    pub interactions: u64,
    pub searched: u64,
    pub flops_per_design: f64,
}

/// The metrics of one final population.
pub fn population_metrics<F: Scalar>(
    pop: &ScoredPopulation<F>,
    k_neighbors: usize,
) -> Result<(F, F, F, F), MetricsError> {
    let fitness = pop.fitness();
    let labels = pop.labels();
    let (_, sparse) = sparseness(
        &pop.codes(),
        k_neighbors.min(pop.entries.len().saturating_sub(1)).max(1),
    )?;
    Ok((
        max_fitness(&fitness)?,
        qd_score(&fitness, &labels, pop.n_clusters)?,
        coverage(&labels, pop.n_clusters),
        sparse,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

/// Mean and standard error `sd/√n` (sample sd; zero for a single value).
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanSe { mean, se: 0.0 };
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    MeanSe {
        mean,
        se: var.sqrt() / (n as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: String,
    pub runs: usize,
    pub max_fitness: MeanSe,
    pub qd_score_x100: MeanSe,
    pub coverage_pct: MeanSe,
    pub sparseness_mean: MeanSe,
    pub interactions: MeanSe,
    pub searched: MeanSe,
    pub flops_per_design: MeanSe,
}

/// Groups rows by algorithm, in order of first appearance.
pub fn summarize(rows: &[RunMetrics]) -> Vec<SummaryRow> {
    let mut algos: Vec<&str> = Vec::new();
    for r in rows {
        if !algos.contains(&r.algo.as_str()) {
            algos.push(&r.algo);
        }
    }
    algos
        .into_iter()
        .map(|a| {
            let group: Vec<&RunMetrics> = rows.iter().filter(|r| r.algo == a).collect();
            let col = |f: &dyn Fn(&RunMetrics) -> f64| {
                mean_se(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            SummaryRow {
                algo: a.to_string(),
                runs: group.len(),
                max_fitness: col(&|r| r.max_fitness),
                qd_score_x100: col(&|r| r.qd_score_x100),
                coverage_pct: col(&|r| r.coverage_pct),
                sparseness_mean: col(&|r| r.sparseness_mean),
                interactions: col(&|r| r.interactions as f64),
                searched: col(&|r| r.searched as f64),
                flops_per_design: col(&|r| r.flops_per_design),
            }
        })
        .collect()
}

/// Fixed-width comparison table.
pub fn format_table(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>4} {:>17} {:>15} {:>15} {:>15} {:>14} {:>10} {:>12}",
        "algo",
        "runs",
        "max fitness",
        "QD-score",
        "coverage %",
        "sparseness",
        "interactions",
        "searched",
        "FLOPs/design"
    );
    let pm = |m: MeanSe, p: usize| format!("{:.p$} ± {:.p$}", m.mean, m.se, p = p);
    for r in summary {
        let _ = writeln!(
            out,
            "{:<12} {:>4} {:>17} {:>15} {:>15} {:>15} {:>14.3e} {:>10.0} {:>12.3e}",
            r.algo,
            r.runs,
            pm(r.max_fitness, 4),
            pm(r.qd_score_x100, 2),
            pm(r.coverage_pct, 1),
            pm(r.sparseness_mean, 3),
            r.interactions.mean,
            r.searched.mean,
            r.flops_per_design.mean,
        );
    }
    out
}
