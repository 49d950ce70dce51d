use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{LokiConfig, Replacement};
use super::design::{Design, DesignSource, World};
use super::SearchError;
use crate::evaluation::{steps_for_iteration, BudgetLedger, SharedEvaluator};
use crate::scalar::Scalar;
use crate::seed::{stream, Rng};

#[derive(Debug, Clone)]
pub struct PoolMember<F> {
    pub design: Design<F>,
    pub score: F,
    pub first_seen_iter: usize,
    /// Order of entry into the pool; breaks score ties.
    pub insertion: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolUpdate {
    pub iter: usize,
    pub sampled: usize,
    pub replaced: usize,
    pub starved: bool,
}

#[derive(Debug, Clone)]
pub struct ElitePool<F> {
    pub cluster_id: usize,
    pub members: Vec<PoolMember<F>>,
    pub update_log: Vec<PoolUpdate>,
    next_insertion: usize,
}

impl<F: Scalar> ElitePool<F> {
    fn push(&mut self, design: Design<F>, score: F, iter: usize) {
        self.members.push(PoolMember {
            design,
            score,
            first_seen_iter: iter,
            insertion: self.next_insertion,
        });
        self.next_insertion += 1;
    }

    fn codes(&self) -> Vec<Vec<F>> {
        self.members.iter().map(|m| m.design.code.clone()).collect()
    }

    /// Index of the member evicted next: lowest score, then earliest entry.
    fn worst(&self) -> usize {
        (0..self.members.len())
            .min_by(|&a, &b| {
                let (x, y) = (&self.members[a], &self.members[b]);
                x.score
                    .partial_cmp(&y.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(x.insertion.cmp(&y.insertion))
            })
            .expect("pool is never empty")
    }

    pub fn scores(&self) -> Vec<F> {
        self.members.iter().map(|m| m.score).collect()
    }

    /// Members ordered best first.
    pub fn ranked(&self) -> Vec<&PoolMember<F>> {
        let mut v: Vec<&PoolMember<F>> = self.members.iter().collect();
        v.sort_by(|x, y| {
            y.score
                .partial_cmp(&x.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(x.insertion.cmp(&y.insertion))
        });
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub cluster: usize,
    pub pool_mean: f64,
    pub pool_max: f64,
    pub replacements: usize,
    pub starved: bool,
    pub interactions: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct ClusterRun<F> {
    pub pool: ElitePool<F>,
    pub evaluator: SharedEvaluator<F>,
    pub history: RunHistory,
    pub ledger: BudgetLedger,
    /// Designs scored for this cluster, initial pool included.
    pub searched: u64,
}

#[derive(Debug, Clone)]
pub struct LokiRun<F> {
    pub pools: Vec<ElitePool<F>>,
    pub history: RunHistory,
    pub ledger: BudgetLedger,
    pub cluster_ledgers: Vec<BudgetLedger>,
    pub searched: u64,
    pub starvation_events: usize,
}

/// Runs every cluster in parallel and merges in cluster order.
pub fn run_loki<F: Scalar>(
    world: &World<F>,
    source: &dyn DesignSource<F>,
    cfg: &LokiConfig,
) -> Result<LokiRun<F>, SearchError> {
    check(world, cfg)?;
    let runs: Vec<ClusterRun<F>> = (0..cfg.n_clusters)
        .into_par_iter()
        .map(|k| run_loki_cluster(world, source, cfg, k))
        .collect::<Result<_, _>>()?;
    Ok(merge(runs))
}

pub fn merge<F: Scalar>(runs: Vec<ClusterRun<F>>) -> LokiRun<F> {
    let mut out = LokiRun {
        pools: Vec::with_capacity(runs.len()),
        history: RunHistory::default(),
        ledger: BudgetLedger::default(),
        cluster_ledgers: Vec::with_capacity(runs.len()),
        searched: 0,
        starvation_events: 0,
    };
    for r in runs {
        out.ledger.merge(&r.ledger);
        out.cluster_ledgers.push(r.ledger);
        out.searched += r.searched;
        out.starvation_events += r.pool.update_log.iter().filter(|u| u.starved).count();
        out.history.records.extend(r.history.records);
        out.pools.push(r.pool);
    }
    out
}

fn check<F: Scalar>(world: &World<F>, cfg: &LokiConfig) -> Result<(), SearchError> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(SearchError::InvalidConfig(problems));
    }
    if world.latent.k() != cfg.n_clusters {
        return Err(SearchError::InvalidConfig(vec![format!(
            "n_clusters is {} but the cluster model has {} centroids",
            cfg.n_clusters,
            world.latent.k()
        )]));
    }
    Ok(())
}

/// One cluster's search, driven by its own stream.
pub fn run_loki_cluster<F: Scalar>(
    world: &World<F>,
    source: &dyn DesignSource<F>,
    cfg: &LokiConfig,
    k: usize,
) -> Result<ClusterRun<F>, SearchError> {
    check(world, cfg)?;
    let mut rng = stream(cfg.seed, "loki", k as u64);
    let mut pool = ElitePool {
        cluster_id: k,
        members: Vec::with_capacity(cfg.pool_size),
        update_log: Vec::new(),
        next_insertion: 0,
    };
    for _ in 0..cfg.pool_size {
        let d = {
            let members = &pool.members;
            let fresh = |d: &Design<F>| members.iter().all(|m| !m.design.same_genome(d));
            source.draw_in_cluster(world, k, &fresh, cfg.attempt_cap, &mut rng)
        };
        let d = d.ok_or(SearchError::ClusterStarvation { cluster: k })?;
        pool.push(d, F::zero(), 0);
    }
    let radius = F::of(cfg.generalization_radius);
    let mut evaluator = SharedEvaluator::new(k, pool.codes(), radius);
    let mut ledger = BudgetLedger::default();
    for m in pool.members.iter_mut() {
        m.score = evaluator.score(
            &world.curve,
            &m.design.code,
            m.design.asymptotic,
            m.design.tau,
            &mut rng,
        );
    }
    let mut history = RunHistory::default();
    let mut searched = cfg.pool_size as u64;

    for iter in 1..=cfg.n_iter {
        let mut replacements = 0;
        let mut starved = false;
        if iter % cfg.f_diff == 0 {
            for m in pool.members.iter_mut() {
                m.score = evaluator.score(
                    &world.curve,
                    &m.design.code,
                    m.design.asymptotic,
                    m.design.tau,
                    &mut rng,
                );
            }
            match draw_candidates(world, source, cfg, k, &pool, &mut rng) {
                Some(candidates) => {
                    let mut scored: Vec<(F, usize, Design<F>)> = candidates
                        .into_iter()
                        .enumerate()
                        .map(|(i, d)| {
                            let s = evaluator.evaluate(
                                &world.curve,
                                &d.code,
                                d.asymptotic,
                                d.tau,
                                cfg.l_eval,
                                &mut ledger,
                                &mut rng,
                            );
                            (s, i, d)
                        })
                        .collect();
                    searched += scored.len() as u64;
                    scored.sort_by(|a, b| {
                        b.0.partial_cmp(&a.0)
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(a.1.cmp(&b.1))
                    });
                    scored.truncate(cfg.n_filter);
                    replacements = replace(&mut pool, scored, cfg.replacement, iter);
                    pool.update_log.push(PoolUpdate {
                        iter,
                        sampled: cfg.n_sample,
                        replaced: replacements,
                        starved: false,
                    });
                }
                None => {
                    log::warn!(
                        "cluster {k}: no in-cluster candidates within {} draws at iteration {iter}",
                        cfg.attempt_cap
                    );
                    starved = true;
                    pool.update_log.push(PoolUpdate {
                        iter,
                        sampled: 0,
                        replaced: 0,
                        starved: true,
                    });
                }
            }
        }
        let steps = steps_for_iteration(cfg.per_cluster_budget, cfg.n_iter, iter);
        evaluator.train(pool.codes(), steps, &mut ledger);
        let scores = pool.scores();
        let n = F::of_usize(scores.len());
        history.records.push(IterationRecord {
            iter,
            cluster: k,
            pool_mean: (scores.iter().copied().sum::<F>() / n).to_f64_lossy(),
            pool_max: scores
                .iter()
                .copied()
                .fold(F::neg_infinity(), F::max)
                .to_f64_lossy(),
            replacements,
            starved,
            interactions: ledger.interactions,
        });
    }
    Ok(ClusterRun {
        pool,
        evaluator,
        history,
        ledger,
        searched,
    })
}

/// `n_sample` distinct in-cluster designs that are not already pooled, or
/// `None` if the cluster ran dry.
fn draw_candidates<F: Scalar>(
    world: &World<F>,
    source: &dyn DesignSource<F>,
    cfg: &LokiConfig,
    k: usize,
    pool: &ElitePool<F>,
    rng: &mut Rng,
) -> Option<Vec<Design<F>>> {
    let mut out: Vec<Design<F>> = Vec::with_capacity(cfg.n_sample);
    for _ in 0..cfg.n_sample {
        let d = {
            let taken = &out;
            let fresh = |d: &Design<F>| {
                pool.members.iter().all(|m| !m.design.same_genome(d))
                    && taken.iter().all(|c| !c.same_genome(d))
            };
            source.draw_in_cluster(world, k, &fresh, cfg.attempt_cap, rng)?
        };
        debug_assert_eq!(d.cluster, k);
        out.push(d);
    }
    Some(out)
}

/// Applies the best candidates (sorted best first) to the pool and
/// returns how many members were swapped out.
fn replace<F: Scalar>(
    pool: &mut ElitePool<F>,
    best: Vec<(F, usize, Design<F>)>,
    rule: Replacement,
    iter: usize,
) -> usize {
    match rule {
        Replacement::Unconditional => {
            let mut keep: Vec<bool> = vec![true; pool.members.len()];
            for _ in 0..best.len() {
                let w = (0..pool.members.len())
                    .filter(|&i| keep[i])
                    .min_by(|&a, &b| {
                        let (x, y) = (&pool.members[a], &pool.members[b]);
                        x.score
                            .partial_cmp(&y.score)
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(x.insertion.cmp(&y.insertion))
                    })
                    .expect("n_filter <= pool size");
                keep[w] = false;
            }
            let mut i = 0;
            pool.members.retain(|_| {
                i += 1;
                keep[i - 1]
            });
            let n = best.len();
            for (score, _, d) in best {
                pool.push(d, score, iter);
            }
            n
        }
        Replacement::Conditional => {
            let mut n = 0;
            for (score, _, d) in best {
                let w = pool.worst();
                if score > pool.members[w].score {
                    pool.members.remove(w);
                    pool.push(d, score, iter);
                    n += 1;
                }
            }
            n
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{MorphologyGenome, Part};
    use std::sync::Arc;

    fn design(tag: f64) -> Design<f64> {
        Design {
            genome: Arc::new(MorphologyGenome::head_only(Part {
                continuous: vec![tag],
                categorical: vec![],
            })),
            code: vec![tag],
            cluster: 0,
            asymptotic: 1.0,
            tau: 1.0,
            niche: 0,
        }
    }

    fn pool(scores: &[f64]) -> ElitePool<f64> {
        let mut p = ElitePool {
            cluster_id: 0,
            members: Vec::new(),
            update_log: Vec::new(),
            next_insertion: 0,
        };
        for (i, &s) in scores.iter().enumerate() {
            p.push(design(i as f64), s, 0);
        }
        p
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn unconditional_swaps_worst_for_best() {
        let mut p = pool(&[5.0, 1.0, 3.0, 1.0, 4.0]);
        let best = vec![(9.0, 0, design(10.0)), (0.5, 1, design(11.0))];
        assert_eq!(replace(&mut p, best, Replacement::Unconditional, 2), 2);
        assert_eq!(sorted(p.scores()), vec![0.5, 3.0, 4.0, 5.0, 9.0]);
        // the next eviction takes the lowest score, then the oldest entry
        let mut q = pool(&[2.0, 2.0, 3.0]);
        replace(
            &mut q,
            vec![(7.0, 0, design(10.0))],
            Replacement::Unconditional,
            2,
        );
        let tags: Vec<f64> = q.members.iter().map(|m| m.design.code[0]).collect();
        assert_eq!(tags, vec![1.0, 2.0, 10.0]);
    }

    #[test]
    fn conditional_only_swaps_improvements() {
        let mut p = pool(&[5.0, 1.0, 3.0, 1.0, 4.0]);
        let best = vec![(9.0, 0, design(10.0)), (0.5, 1, design(11.0))];
        assert_eq!(replace(&mut p, best, Replacement::Conditional, 2), 1);
        assert_eq!(sorted(p.scores()), vec![1.0, 3.0, 4.0, 5.0, 9.0]);
    }
}
