use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::config::{RandomConfig, TournamentConfig};
use super::design::{Design, DesignSource, Variation, World};
use super::{GenerationRecord, SearchError};
use crate::evaluation::{BudgetLedger, IndependentTrainer};
use crate::scalar::Scalar;
use crate::seed::stream;

#[derive(Debug, Clone)]
pub struct Individual<F> {
    pub id: usize,
    pub parent: Option<usize>,
    pub generation: usize,
    pub design: Design<F>,
    pub fitness: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub generation: usize,
    pub fitness: f64,
}

#[derive(Debug, Clone)]
pub struct TournamentRun<F> {
    /// Survivors, ordered by id.
    pub population: Vec<Individual<F>>,
    pub lineage: Vec<LineageRecord>,
    pub history: Vec<GenerationRecord>,
    pub ledger: BudgetLedger,
}

fn lineage<F: Scalar>(i: &Individual<F>) -> LineageRecord {
    LineageRecord {
        id: i.id,
        parent: i.parent,
        generation: i.generation,
        fitness: i.fitness.to_f64_lossy(),
    }
}

/// Index into `pop` of the fittest of `size` distinct random entrants;
/// ties go to the older individual.
pub fn tournament_select<F: Scalar>(
    pop: &[Individual<F>],
    size: usize,
    rng: &mut crate::seed::Rng,
) -> usize {
    sample(rng, pop.len(), size)
        .into_iter()
        .max_by(|&a, &b| {
            pop[a]
                .fitness
                .partial_cmp(&pop[b].fitness)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(pop[b].id.cmp(&pop[a].id))
        })
        .expect("tournament size is at least one")
}

/// Steady-state evolution with global tournament selection: each
/// generation trains `offspring` mutated children, then the worst
/// individuals are evicted back down to `population`.
pub fn run_tournament<F: Scalar>(
    world: &World<F>,
    source: &dyn DesignSource<F>,
    variation: &dyn Variation<F>,
    trainer: &IndependentTrainer,
    cfg: &TournamentConfig,
    seed: u64,
) -> Result<TournamentRun<F>, SearchError> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(SearchError::InvalidConfig(problems));
    }
    let mut rng = stream(seed, "tournament", 0);
    let mut ledger = BudgetLedger::default();
    let mut population: Vec<Individual<F>> = (0..cfg.population)
        .map(|id| {
            let design = source.draw(world, &mut rng);
            let fitness = trainer.train(design.asymptotic, design.tau, &mut ledger, &mut rng);
            Individual {
                id,
                parent: None,
                generation: 0,
                design,
                fitness,
            }
        })
        .collect();
    let mut lineage_log: Vec<LineageRecord> = population.iter().map(lineage).collect();
    let mut history = vec![GenerationRecord::of(
        0,
        cfg.population,
        population.iter().map(|i| i.fitness),
        &ledger,
    )];
    let mut next_id = cfg.population;
    for generation in 1..=cfg.generations {
        let mut children = Vec::with_capacity(cfg.offspring);
        for _ in 0..cfg.offspring {
            let p = tournament_select(&population, cfg.tournament_size, &mut rng);
            let design = variation.vary(&population[p].design, world, &mut rng);
            let fitness = trainer.train(design.asymptotic, design.tau, &mut ledger, &mut rng);
            let child = Individual {
                id: next_id,
                parent: Some(population[p].id),
                generation,
                design,
                fitness,
            };
            next_id += 1;
            lineage_log.push(lineage(&child));
            children.push(child);
        }
        population.extend(children);
        // keep the best `population`; among equals the younger survives
        population.sort_by(|a, b| {
            b.fitness
                .partial_cmp(&a.fitness)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.id.cmp(&a.id))
        });
        population.truncate(cfg.population);
        population.sort_by_key(|i| i.id);
        history.push(GenerationRecord::of(
            generation,
            next_id,
            population.iter().map(|i| i.fitness),
            &ledger,
        ));
    }
    Ok(TournamentRun {
        population,
        lineage: lineage_log,
        history,
        ledger,
    })
}

/// Independent random samples, each trained on its own.
pub fn run_random<F: Scalar>(
    world: &World<F>,
    source: &dyn DesignSource<F>,
    trainer: &IndependentTrainer,
    cfg: &RandomConfig,
    seed: u64,
) -> Result<(Vec<Individual<F>>, BudgetLedger), SearchError> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(SearchError::InvalidConfig(problems));
    }
    let mut rng = stream(seed, "random", 0);
    let mut ledger = BudgetLedger::default();
    let pop = (0..cfg.count)
        .map(|id| {
            let design = source.draw(world, &mut rng);
            let fitness = trainer.train(design.asymptotic, design.tau, &mut ledger, &mut rng);
            Individual {
                id,
                parent: None,
                generation: 0,
                design,
                fitness,
            }
        })
        .collect();
    Ok((pop, ledger))
}
