use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Saturating learning curve `f∞·(1 − exp(−t/τ))` with
/// `τ = τ0·(1 + κ·limbs)`, so designs with more limbs learn slower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningCurveModel {
    #[serde(default = "d_tau0")]
    pub tau0: f64,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    /// Absolute standard deviation of the observation noise.
    #[serde(default = "d_noise")]
    pub noise_sd: f64,
}

fn d_tau0() -> f64 {
    2.0e3
}
fn d_kappa() -> f64 {
    1.0
}
fn d_noise() -> f64 {
    0.02
}

impl Default for LearningCurveModel {
    fn default() -> Self {
        Self {
            tau0: d_tau0(),
            kappa: d_kappa(),
            noise_sd: d_noise(),
        }
    }
}

impl LearningCurveModel {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            out.push(format!("tau0 must be positive, got {}", self.tau0));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            out.push(format!("kappa must be non-negative, got {}", self.kappa));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            out.push(format!(
                "noise_sd must be non-negative, got {}",
                self.noise_sd
            ));
        }
        out
    }

    pub fn noiseless(self) -> Self {
        Self {
            noise_sd: 0.0,
            ..self
        }
    }

    pub fn tau<F: Scalar>(&self, limb_count: usize) -> F {
        F::of(self.tau0 * (1.0 + self.kappa * limb_count as f64))
    }

    /// Noise-free fitness after `t` steps.
    pub fn expected<F: Scalar>(&self, asymptotic: F, tau: F, t: F) -> F {
        if t <= F::zero() {
            return F::zero();
        }
        asymptotic * (F::one() - (-t / tau).exp())
    }

    /// One noisy observation. No random number is drawn when the noise is
    /// off, so noiseless runs do not depend on stream position.
    pub fn observe<F: Scalar, R: Rng + ?Sized>(
        &self,
        asymptotic: F,
        tau: F,
        t: F,
        rng: &mut R,
    ) -> F {
        let mean = self.expected(asymptotic, tau, t);
        if self.noise_sd == 0.0 {
            return mean;
        }
        let z: f64 = rng.sample(StandardNormal);
        mean + F::of(self.noise_sd * z)
    }
}
