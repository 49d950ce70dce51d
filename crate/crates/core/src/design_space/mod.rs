//! The synthetic morphology design space: genomes, their padded matrix
//! form, random sampling, validation and the mutation operator.

mod genome;
mod mutation;
mod schema;
mod serial;

pub use genome::{
    depth_class, sample_random, validate, DesignSpaceConfig, Limb, LimbCountDistribution,
    MorphologyGenome, Part, Violation,
};
pub use mutation::{mutate, Mutation, MutationOp, MutationParams};
pub use schema::{Attribute, AttributeKind, AttributeSchema, RowLayout, RowScope, SchemaError};
pub use serial::{deserialize, serialize, SerialError, SerializedGenome, PADDING_DEPTH};

use rand::Rng;

/// A schema together with the space configuration it is sampled under.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesignSpace {
    pub schema: AttributeSchema,
    pub config: DesignSpaceConfig,
}

impl DesignSpace {
    pub fn new(schema: AttributeSchema, config: DesignSpaceConfig) -> Self {
        Self { schema, config }
    }

    pub fn l_max(&self) -> usize {
        self.config.l_max
    }

    pub fn rows(&self) -> usize {
        self.config.rows()
    }

    pub fn cols(&self) -> usize {
        self.schema.total_columns()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MorphologyGenome {
        sample_random(&self.schema, &self.config, rng)
    }

    pub fn serialize(&self, g: &MorphologyGenome) -> Result<SerializedGenome, SerialError> {
        serialize(g, &self.schema, self.config.l_max)
    }

    pub fn deserialize(&self, s: &SerializedGenome) -> Result<MorphologyGenome, SerialError> {
        deserialize(s, &self.schema)
    }

    pub fn validate(&self, g: &MorphologyGenome) -> Vec<Violation> {
        validate(g, &self.schema, self.config.l_max)
    }

    pub fn mutate<R: Rng + ?Sized>(
        &self,
        g: &MorphologyGenome,
        params: &MutationParams,
        rng: &mut R,
    ) -> Mutation {
        mutate(g, &self.schema, self.config.l_max, params, rng)
    }
}
