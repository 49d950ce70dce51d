use rand::seq::index::sample;
use rand::Rng as _;

use super::config::MapElitesConfig;
use super::design::{Classifier, Design, DesignSource, Variation, World};
use super::{GenerationRecord, SearchError};
use crate::evaluation::{BudgetLedger, IndependentTrainer};
use crate::scalar::Scalar;
use crate::seed::stream;

#[derive(Debug, Clone)]
pub struct Elite<F> {
    pub design: Design<F>,
    pub fitness: F,
    pub cell: usize,
    /// Sequence number among trained designs.
    pub trained_index: usize,
}

/// Cells of up to `capacity` elites each, best first.
#[derive(Debug, Clone)]
pub struct MapElitesArchive<F> {
    pub cells: Vec<Vec<Elite<F>>>,
    pub capacity: usize,
}

impl<F: Scalar> MapElitesArchive<F> {
    pub fn new(cells: usize, capacity: usize) -> Self {
        Self {
            cells: vec![Vec::new(); cells],
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn elites(&self) -> impl Iterator<Item = &Elite<F>> {
        self.cells.iter().flatten()
    }

    /// Inserts if the cell has room or `e` beats its worst elite; equal
    /// fitness keeps the incumbent.
    pub fn insert(&mut self, e: Elite<F>) -> bool {
        let cap = self.capacity;
        let cell = &mut self.cells[e.cell];
        if cell.len() == cap {
            match cell.last() {
                Some(worst) if e.fitness > worst.fitness => {
                    cell.pop();
                }
                _ => return false,
            }
        }
        let at = cell.partition_point(|x| x.fitness >= e.fitness);
        cell.insert(at, e);
        true
    }
}

#[derive(Debug, Clone)]
pub struct MapElitesRun<F> {
    pub archive: MapElitesArchive<F>,
    pub ledger: BudgetLedger,
    pub trained: usize,
    pub underflow_events: usize,
    pub history: Vec<GenerationRecord>,
}

#[allow(clippy::too_many_arguments)]
pub fn run_map_elites<F: Scalar>(
    world: &World<F>,
    cells: &Classifier<F>,
    source: &dyn DesignSource<F>,
    variation: &dyn Variation<F>,
    trainer: &IndependentTrainer,
    cfg: &MapElitesConfig,
    seed: u64,
) -> Result<MapElitesRun<F>, SearchError> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(SearchError::InvalidConfig(problems));
    }
    let mut rng = stream(seed, "map-elites", 0);
    let mut run = MapElitesRun {
        archive: MapElitesArchive::new(cells.k(), cfg.elites_per_cell),
        ledger: BudgetLedger::default(),
        trained: 0,
        underflow_events: 0,
        history: Vec::new(),
    };
    let mut generation = 0;
    while run.trained < cfg.n_train {
        let n = cfg.batch.min(cfg.n_train - run.trained);
        let children: Vec<Design<F>> = if generation == 0 {
            (0..n).map(|_| source.draw(world, &mut rng)).collect()
        } else {
            let elites: Vec<&Elite<F>> = run.archive.elites().collect();
            let parents: Vec<usize> = if elites.len() >= n {
                sample(&mut rng, elites.len(), n).into_vec()
            } else {
                log::warn!(
                    "map-elites generation {generation}: {} elites for {n} parents, selecting with replacement",
                    elites.len()
                );
                run.underflow_events += 1;
                (0..n).map(|_| rng.random_range(0..elites.len())).collect()
            };
            let parents: Vec<Design<F>> = parents
                .into_iter()
                .map(|i| elites[i].design.clone())
                .collect();
            parents
                .iter()
                .map(|p| variation.vary(p, world, &mut rng))
                .collect()
        };
        for design in children {
            let fitness = trainer.train(design.asymptotic, design.tau, &mut run.ledger, &mut rng);
            let cell = cells.classify(world.space, &design.genome);
            run.archive.insert(Elite {
                design,
                fitness,
                cell,
                trained_index: run.trained,
            });
            run.trained += 1;
        }
        run.history.push(GenerationRecord::of(
            generation,
            run.trained,
            run.archive.elites().map(|e| e.fitness),
            &run.ledger,
        ));
        generation += 1;
    }
    Ok(run)
}
