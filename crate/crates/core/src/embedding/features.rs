use crate::design_space::{AttributeSchema, SerializedGenome};
use crate::scalar::Scalar;

/// Flattened matrix with categorical indices scaled to [0, 1] by their
/// cardinality. Unmasked cells read as zero. Length is `rows · cols`.
pub fn raw_features<F: Scalar>(s: &SerializedGenome, schema: &AttributeSchema) -> Vec<F> {
    let mut out = vec![F::zero(); s.rows * s.cols];
    for row in 0..s.rows {
        for col in 0..s.cols {
            let i = row * s.cols + col;
            if s.mask_cont[i] != 0 {
                out[i] = F::of(s.matrix[i]);
            } else if s.mask_cat[i] != 0 {
                let card = schema.cardinality(col).unwrap_or(2);
                out[i] = F::of(s.matrix[i] / (card - 1) as f64);
            }
        }
    }
    out
}

/// Encoder input: the raw features followed by one presence flag per row.
pub(crate) fn encoder_input<F: Scalar>(s: &SerializedGenome, schema: &AttributeSchema) -> Vec<F> {
    let mut x = raw_features(s, schema);
    x.extend((0..s.rows).map(|r| if r < s.eos_index { F::one() } else { F::zero() }));
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{DesignSpace, DesignSpaceConfig, LimbCountDistribution};
    use crate::seed::rng_from_seed;

    #[test]
    fn head_only_is_zero_past_first_row() {
        let space = DesignSpace::new(
            AttributeSchema::default(),
            DesignSpaceConfig {
                l_max: 10,
                limb_count: LimbCountDistribution::Fixed { count: 0 },
            },
        );
        let g = space.sample(&mut rng_from_seed(0));
        let s = space.serialize(&g).unwrap();
        let f: Vec<f64> = raw_features(&s, &space.schema);
        assert_eq!(f.len(), 11 * 47);
        assert!(f[47..].iter().all(|&v| v == 0.0));
        assert!(f[..47].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn identical_genomes_identical_features_in_unit_range_for_categoricals() {
        let space = DesignSpace::default();
        let g = space.sample(&mut rng_from_seed(5));
        let s = space.serialize(&g).unwrap();
        let a: Vec<f64> = raw_features(&s, &space.schema);
        let b: Vec<f64> = raw_features(&s.clone(), &space.schema);
        assert_eq!(a, b);
        for i in 0..a.len() {
            if s.mask_cat[i] != 0 {
                assert!((0.0..=1.0).contains(&a[i]));
            }
        }
    }
}
