//! Latent embedding of serialized genomes: a small masked variational
//! autoencoder plus the raw-parameter featurization used by the ablation.

mod features;
mod vae;

pub use features::raw_features;
pub use vae::{
    beta_schedule, code_spread, kl, masked_recon_loss, train_vae, EpochRecord, LossBreakdown,
    Prepared, RowTargets, TrainingHistory, VaeConfig, VaeDims, VaeError, VaeModel, VaeParams,
    CHECKPOINT_VERSION,
};

use crate::design_space::{AttributeSchema, SerializedGenome};
use crate::scalar::Scalar;

/// Anything that maps a serialized genome to a fixed-length feature vector.
pub trait Embedder<F: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, s: &SerializedGenome) -> Vec<F>;
}

impl<F: Scalar> Embedder<F> for VaeModel<F> {
    fn dim(&self) -> usize {
        self.latent_dim()
    }

    fn embed(&self, s: &SerializedGenome) -> Vec<F> {
        self.encode(s).expect("genome shape matches the embedding")
    }
}

/// The raw flattened parameters, for raw-space clustering.
#[derive(Debug, Clone)]
pub struct RawEmbedder {
    pub schema: AttributeSchema,
    pub rows: usize,
}

impl<F: Scalar> Embedder<F> for RawEmbedder {
    fn dim(&self) -> usize {
        self.rows * self.schema.total_columns()
    }

    fn embed(&self, s: &SerializedGenome) -> Vec<F> {
        raw_features(s, &self.schema)
    }
}
