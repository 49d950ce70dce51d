use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::genome::{random_part, refresh_depth_classes, Limb, MorphologyGenome};
use super::schema::{AttributeSchema, RowScope};

/// Relative probabilities of the four mutation operators and the Gaussian
/// step size, expressed as a fraction of each continuous attribute's range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationParams {
    pub p_perturb: f64,
    pub p_resample: f64,
    pub p_grow: f64,
    pub p_prune: f64,
    pub sigma: f64,
}

impl Default for MutationParams {
    fn default() -> Self {
        Self {
            p_perturb: 0.5,
            p_resample: 0.2,
            p_grow: 0.15,
            p_prune: 0.15,
            sigma: 0.1,
        }
    }
}

impl MutationParams {
    pub fn validate(&self) -> Result<(), String> {
        let ps = [self.p_perturb, self.p_resample, self.p_grow, self.p_prune];
        if ps.iter().any(|p| !p.is_finite() || *p < 0.0) || ps.iter().sum::<f64>() <= 0.0 {
            return Err("mutation probabilities must be non-negative with positive sum".into());
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err("mutation sigma must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationOp {
    Perturb,
    Resample,
    Grow,
    Prune,
}

/// Outcome of one mutation: the child plus which operator was drawn and
/// which one was actually applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Mutation {
    pub genome: MorphologyGenome,
    pub requested: MutationOp,
    pub applied: MutationOp,
}

impl Mutation {
    pub fn fell_back(&self) -> bool {
        self.requested != self.applied
    }
}

fn pick_op<R: Rng + ?Sized>(p: &MutationParams, rng: &mut R) -> MutationOp {
    let total = p.p_perturb + p.p_resample + p.p_grow + p.p_prune;
    let u = rng.random::<f64>() * total;
    if u < p.p_perturb {
        MutationOp::Perturb
    } else if u < p.p_perturb + p.p_resample {
        MutationOp::Resample
    } else if u < p.p_perturb + p.p_resample + p.p_grow {
        MutationOp::Grow
    } else {
        MutationOp::Prune
    }
}

fn perturb<R: Rng + ?Sized>(
    g: &mut MorphologyGenome,
    schema: &AttributeSchema,
    sigma: f64,
    rng: &mut R,
) {
    let row = rng.random_range(0..=g.limbs.len());
    let (part, scope) = if row == 0 {
        (&mut g.head, RowScope::Head)
    } else {
        (&mut g.limbs[row - 1].part, RowScope::Limb)
    };
    for (v, &c) in part
        .continuous
        .iter_mut()
        .zip(&schema.layout(scope).continuous)
    {
        let (lo, hi) = schema.bounds(c).unwrap();
        let z: f64 = rng.sample(StandardNormal);
        *v = (*v + sigma * (hi - lo) * z).clamp(lo, hi);
    }
}

/// Resample one free categorical cell. Returns false when the genome has none.
fn resample<R: Rng + ?Sized>(
    g: &mut MorphologyGenome,
    schema: &AttributeSchema,
    rng: &mut R,
) -> bool {
    let mut slots = Vec::new();
    let head_cat = &schema.layout(RowScope::Head).categorical;
    let limb_cat = &schema.layout(RowScope::Limb).categorical;
    for (slot, &c) in head_cat.iter().enumerate() {
        if !schema.attribute(c).tree_depth {
            slots.push((0usize, slot, c));
        }
    }
    for row in 1..=g.limbs.len() {
        for (slot, &c) in limb_cat.iter().enumerate() {
            if !schema.attribute(c).tree_depth {
                slots.push((row, slot, c));
            }
        }
    }
    if slots.is_empty() {
        return false;
    }
    let (row, slot, c) = slots[rng.random_range(0..slots.len())];
    let card = schema.cardinality(c).unwrap();
    let part = if row == 0 {
        &mut g.head
    } else {
        &mut g.limbs[row - 1].part
    };
    part.categorical[slot] = rng.random_range(0..card);
    true
}

/// Apply exactly one mutation operator. Grow on a full genome, prune on a
/// head-only genome and resample without free categorical cells fall back
/// to a continuous perturbation. The child is valid and canonical whenever
/// the parent is.
pub fn mutate<R: Rng + ?Sized>(
    g: &MorphologyGenome,
    schema: &AttributeSchema,
    l_max: usize,
    params: &MutationParams,
    rng: &mut R,
) -> Mutation {
    let requested = pick_op(params, rng);
    let mut child = g.clone();
    let applied = match requested {
        MutationOp::Grow if child.limbs.len() < l_max => {
            let parent = rng.random_range(0..=child.limbs.len());
            let part = random_part(schema, RowScope::Limb, 1, rng);
            child.limbs.push(Limb { parent, part });
            child.canonicalize();
            refresh_depth_classes(&mut child, schema);
            MutationOp::Grow
        }
        MutationOp::Prune if !child.limbs.is_empty() => {
            let children = child.children();
            let leaves: Vec<usize> = (1..children.len())
                .filter(|&n| children[n].is_empty())
                .collect();
            let victim = leaves[rng.random_range(0..leaves.len())];
            child.limbs.remove(victim - 1);
            for limb in &mut child.limbs {
                if limb.parent > victim {
                    limb.parent -= 1;
                }
            }
            MutationOp::Prune
        }
        MutationOp::Resample if resample(&mut child, schema, rng) => MutationOp::Resample,
        _ => {
            perturb(&mut child, schema, params.sigma, rng);
            MutationOp::Perturb
        }
    };
    Mutation {
        genome: child,
        requested,
        applied,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::genome::{sample_random, validate, DesignSpaceConfig};
    use crate::design_space::LimbCountDistribution;
    use crate::seed::rng_from_seed;

    #[test]
    fn zero_sigma_perturb_is_identity() {
        let s = AttributeSchema::default();
        let params = MutationParams {
            p_perturb: 1.0,
            p_resample: 0.0,
            p_grow: 0.0,
            p_prune: 0.0,
            sigma: 0.0,
        };
        let mut rng = rng_from_seed(11);
        for _ in 0..50 {
            let g = sample_random(&s, &DesignSpaceConfig::default(), &mut rng);
            let m = mutate(&g, &s, 10, &params, &mut rng);
            assert_eq!(m.genome, g);
            assert_eq!(m.applied, MutationOp::Perturb);
        }
    }

    #[test]
    fn prune_on_head_only_falls_back() {
        let s = AttributeSchema::default();
        let space = DesignSpaceConfig {
            l_max: 10,
            limb_count: LimbCountDistribution::Fixed { count: 0 },
        };
        let params = MutationParams {
            p_perturb: 0.0,
            p_resample: 0.0,
            p_grow: 0.0,
            p_prune: 1.0,
            sigma: 0.1,
        };
        let mut rng = rng_from_seed(12);
        let g = sample_random(&s, &space, &mut rng);
        let m = mutate(&g, &s, 10, &params, &mut rng);
        assert_eq!(m.requested, MutationOp::Prune);
        assert_eq!(m.applied, MutationOp::Perturb);
        assert!(m.fell_back());
    }

    #[test]
    fn grow_on_full_genome_falls_back() {
        let s = AttributeSchema::default();
        let space = DesignSpaceConfig {
            l_max: 10,
            limb_count: LimbCountDistribution::Fixed { count: 10 },
        };
        let params = MutationParams {
            p_perturb: 0.0,
            p_resample: 0.0,
            p_grow: 1.0,
            p_prune: 0.0,
            sigma: 0.1,
        };
        let mut rng = rng_from_seed(13);
        let g = sample_random(&s, &space, &mut rng);
        let m = mutate(&g, &s, 10, &params, &mut rng);
        assert_eq!(m.applied, MutationOp::Perturb);
        assert_eq!(m.genome.limb_count(), 10);
    }

    #[test]
    fn ten_thousand_mutations_stay_valid() {
        let s = AttributeSchema::default();
        let space = DesignSpaceConfig::default();
        let params = MutationParams::default();
        let mut rng = rng_from_seed(14);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let g = sample_random(&s, &space, &mut rng);
            let m = mutate(&g, &s, space.l_max, &params, &mut rng);
            let v = validate(&m.genome, &s, space.l_max);
            assert!(v.is_empty(), "{:?} produced {v:?}", m.applied);
            assert!(m.genome.is_canonical());
            counts[m.applied as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0));
    }
}
