//! The fitness world: a niche landscape, learning curves, the shared
//! surrogate evaluator, the per-design trainer and budget accounting.

mod budget;
mod curve;
mod landscape;
mod shared;

pub use budget::{
    flops_per_morphology, searched_morphologies, steps_for_iteration, total_interactions,
    update_count, BudgetLedger, FlopsModel, NoMorphologiesServed, SearchedMorphologies,
};
pub use curve::LearningCurveModel;
pub use landscape::{
    deceptive_spec, DeceptiveParams, LandscapeError, LandscapeSpec, Niche, NicheLandscape,
    NicheSpec,
};
pub use shared::SharedEvaluator;

use rand::Rng;

use crate::scalar::Scalar;

/// Trains one design on its own for a fixed number of steps, then reads
/// its fitness off the learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependentTrainer {
    pub curve: LearningCurveModel,
    pub steps: u64,
}

impl IndependentTrainer {
    pub fn train<F: Scalar, R: Rng + ?Sized>(
        &self,
        asymptotic: F,
        tau: F,
        ledger: &mut BudgetLedger,
        rng: &mut R,
    ) -> F {
        ledger.charge_training(self.steps);
        self.curve
            .observe(asymptotic, tau, F::of(self.steps as f64), rng)
    }
}
