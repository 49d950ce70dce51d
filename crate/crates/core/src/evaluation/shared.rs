use rand::Rng;
use serde::{Deserialize, Serialize};

use super::budget::BudgetLedger;
use super::curve::LearningCurveModel;
use crate::scalar::{squared_distance, Scalar};

/// Surrogate for one cluster's shared policy: training progress `t_k` plus
/// a distance-based falloff of how well that progress transfers to a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedEvaluator<F> {
    pub cluster_id: usize,
    pub progress: u64,
    pub pool_codes: Vec<Vec<F>>,
    /// `ρ_g`; infinite disables the falloff.
    pub generalization_radius: F,
}

impl<F: Scalar> SharedEvaluator<F> {
    pub fn new(cluster_id: usize, pool_codes: Vec<Vec<F>>, generalization_radius: F) -> Self {
        Self {
            cluster_id,
            progress: 0,
            pool_codes,
            generalization_radius,
        }
    }

    /// Distance from `code` to the nearest pool member.
    pub fn nearest_distance(&self, code: &[F]) -> F {
        self.pool_codes
            .iter()
            .map(|p| squared_distance(p, code))
            .fold(F::infinity(), F::min)
            .sqrt()
    }

    /// `t_k · exp(−d²/(2ρ²))`.
    pub fn effective_time(&self, d_min: F) -> F {
        let t = F::of(self.progress as f64);
        if self.generalization_radius.is_infinite() || d_min == F::zero() {
            return t;
        }
        let r = self.generalization_radius;
        t * (-(d_min * d_min) / (F::of(2.0) * r * r)).exp()
    }

    /// Score without charging the ledger; used to re-rank pool members,
    /// which are observed through the training rollouts anyway.
    pub fn score<R: Rng + ?Sized>(
        &self,
        curve: &LearningCurveModel,
        code: &[F],
        asymptotic: F,
        tau: F,
        rng: &mut R,
    ) -> F {
        let t = self.effective_time(self.nearest_distance(code));
        curve.observe(asymptotic, tau, t, rng)
    }

    /// One evaluation episode of `l_eval` steps with the current policy.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate<R: Rng + ?Sized>(
        &self,
        curve: &LearningCurveModel,
        code: &[F],
        asymptotic: F,
        tau: F,
        l_eval: u64,
        ledger: &mut BudgetLedger,
        rng: &mut R,
    ) -> F {
        assert!(
            !self.pool_codes.is_empty(),
            "shared evaluation needs a non-empty pool"
        );
        ledger.charge_evaluation(l_eval);
        self.score(curve, code, asymptotic, tau, rng)
    }

    /// Analog of one policy-optimisation step on the pool.
    pub fn train(&mut self, pool_codes: Vec<Vec<F>>, steps: u64, ledger: &mut BudgetLedger) {
        if steps == 0 {
            return;
        }
        self.progress += steps;
        ledger.charge_training(steps);
        self.pool_codes = pool_codes;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn ev(radius: f64) -> SharedEvaluator<f64> {
        let mut e = SharedEvaluator::new(0, vec![vec![0.0, 0.0], vec![4.0, 0.0]], radius);
        e.progress = 1000;
        e
    }

    #[test]
    fn effective_time_landmarks() {
        let e = ev(2.0);
        assert_eq!(e.effective_time(0.0), 1000.0);
        let at_radius = e.effective_time(2.0);
        assert!((at_radius - 1000.0 * (-0.5f64).exp()).abs() < 1e-9);
        assert_eq!(ev(f64::INFINITY).effective_time(50.0), 1000.0);
    }

    #[test]
    fn evaluation_matches_curve_at_effective_time() {
        let curve = LearningCurveModel {
            tau0: 300.0,
            kappa: 0.0,
            noise_sd: 0.0,
        };
        let e = ev(2.0);
        let mut ledger = BudgetLedger::default();
        let mut rng = rng_from_seed(1);
        // nearest pool member is at distance 2
        let got = e.evaluate(&curve, &[2.0, 0.0], 1.5, 300.0, 200, &mut ledger, &mut rng);
        let want = curve.expected(1.5, 300.0, 1000.0 * (-0.5f64).exp());
        assert!((got - want).abs() < 1e-12);
        assert_eq!(ledger.interactions, 200);
        assert_eq!(ledger.evaluations, 1);
    }

    #[test]
    fn untrained_policy_scores_noise_only() {
        let curve = LearningCurveModel {
            noise_sd: 0.0,
            ..LearningCurveModel::default()
        };
        let e = SharedEvaluator::new(0, vec![vec![0.0]], 1.0);
        let mut rng = rng_from_seed(1);
        assert_eq!(e.score(&curve, &[0.0], 1.0, 10.0, &mut rng), 0.0);
    }

    #[test]
    fn estimate_decays_with_distance() {
        let curve = LearningCurveModel {
            noise_sd: 0.0,
            ..LearningCurveModel::default()
        };
        let e = ev(1.5);
        let mut rng = rng_from_seed(1);
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let s = e.score(&curve, &[-(i as f64) * 0.1, 0.0], 1.0, 500.0, &mut rng);
            assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn training_conserves_interactions() {
        let mut e = ev(1.0);
        let mut ledger = BudgetLedger::default();
        e.train(vec![vec![1.0, 1.0]], 0, &mut ledger);
        assert_eq!(e, ev(1.0));
        e.train(vec![vec![1.0, 1.0]], 37, &mut ledger);
        assert_eq!(e.progress, 1037);
        assert_eq!(ledger.interactions, 37);
        assert_eq!(e.pool_codes, vec![vec![1.0, 1.0]]);
    }
}
