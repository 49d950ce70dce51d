use rand::Rng;
use serde::{Deserialize, Serialize};

use super::schema::{AttributeKind, AttributeSchema, RowLayout, RowScope};

/// Attribute values of one row (head or limb), in schema column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub continuous: Vec<f64>,
    pub categorical: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limb {
    /// 0 is the head, `j + 1` is `limbs[j]`.
    pub parent: usize,
    #[serde(flatten)]
    pub part: Part,
}

/// A morphology: a head plus a tree of limbs hanging off it.
///
/// Sibling order is the order limbs appear in `limbs`. Genomes produced by
/// this crate are kept in canonical form, where `limbs` is already the
/// depth-first preorder of the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphologyGenome {
    pub head: Part,
    pub limbs: Vec<Limb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LimbCountDistribution {
    /// Uniform over `0..=l_max`.
    Uniform,
    Fixed {
        count: usize,
    },
    /// Relative weight of each limb count starting at 0.
    Weights {
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpaceConfig {
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    #[serde(default = "default_limb_count")]
    pub limb_count: LimbCountDistribution,
}

fn default_l_max() -> usize {
    10
}

fn default_limb_count() -> LimbCountDistribution {
    LimbCountDistribution::Uniform
}

impl Default for DesignSpaceConfig {
    fn default() -> Self {
        Self {
            l_max: default_l_max(),
            limb_count: default_limb_count(),
        }
    }
}

impl DesignSpaceConfig {
    /// Rows of the serialized matrix: the head plus `l_max` limbs.
    pub fn rows(&self) -> usize {
        self.l_max + 1
    }

    pub fn validate(&self) -> Result<(), String> {
        match &self.limb_count {
            LimbCountDistribution::Uniform => Ok(()),
            LimbCountDistribution::Fixed { count } if *count <= self.l_max => Ok(()),
            LimbCountDistribution::Fixed { count } => Err(format!(
                "fixed limb count {count} exceeds l_max {}",
                self.l_max
            )),
            LimbCountDistribution::Weights { weights } => {
                if weights.is_empty() || weights.len() > self.l_max + 1 {
                    return Err("limb-count weights must have 1..=l_max+1 entries".into());
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0)
                    || weights.iter().sum::<f64>() <= 0.0
                {
                    return Err("limb-count weights must be non-negative with positive sum".into());
                }
                Ok(())
            }
        }
    }

    fn draw_limb_count<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.limb_count {
            LimbCountDistribution::Uniform => rng.random_range(0..=self.l_max),
            LimbCountDistribution::Fixed { count } => *count,
            LimbCountDistribution::Weights { weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        return i;
                    }
                    u -= w;
                }
                weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
            }
        }
    }
}

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    TooManyLimbs {
        count: usize,
        max: usize,
    },
    WrongArity {
        row: usize,
    },
    ParentOutOfRange {
        limb: usize,
        parent: usize,
    },
    Cycle {
        limb: usize,
    },
    ContinuousOutOfBounds {
        row: usize,
        column: usize,
        value: f64,
    },
    CategoryOutOfRange {
        row: usize,
        column: usize,
        value: usize,
    },
    DepthClassMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
}

impl MorphologyGenome {
    pub fn head_only(head: Part) -> Self {
        Self {
            head,
            limbs: Vec::new(),
        }
    }

    pub fn limb_count(&self) -> usize {
        self.limbs.len()
    }

    /// Children of every node (0 = head) in insertion order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.limbs.len() + 1];
        for (j, limb) in self.limbs.iter().enumerate() {
            if limb.parent <= self.limbs.len() {
                children[limb.parent].push(j + 1);
            }
        }
        children
    }

    /// Depth-first preorder of node ids (0 = head) together with depths.
    /// Only reachable nodes are visited.
    pub fn dfs_order(&self) -> Vec<(usize, usize)> {
        let children = self.children();
        let mut order = Vec::with_capacity(self.limbs.len() + 1);
        let mut stack = vec![(0usize, 0usize)];
        while let Some((node, depth)) = stack.pop() {
            order.push((node, depth));
            if order.len() > self.limbs.len() + 1 {
                break;
            }
            for &c in children[node].iter().rev() {
                stack.push((c, depth + 1));
            }
        }
        order
    }

    /// Tree depth of every limb (`limbs[j]` at index j), or `None` when the
    /// parent links are not a tree.
    pub fn limb_depths(&self) -> Option<Vec<usize>> {
        let order = self.dfs_order();
        if order.len() != self.limbs.len() + 1 {
            return None;
        }
        let mut depths = vec![0; self.limbs.len()];
        for (node, depth) in order.into_iter().skip(1) {
            depths[node - 1] = depth;
        }
        Some(depths)
    }

    /// Reorder `limbs` into depth-first preorder, keeping sibling order.
    /// The genome must be a valid tree.
    pub fn canonicalize(&mut self) {
        let order = self.dfs_order();
        debug_assert_eq!(order.len(), self.limbs.len() + 1, "not a tree");
        let mut new_index = vec![0usize; self.limbs.len() + 1];
        for (pos, (node, _)) in order.iter().enumerate() {
            new_index[*node] = pos;
        }
        let old = std::mem::take(&mut self.limbs);
        self.limbs = order
            .iter()
            .skip(1)
            .map(|(node, _)| {
                let mut limb = old[node - 1].clone();
                limb.parent = new_index[limb.parent];
                limb
            })
            .collect();
    }

    pub fn is_canonical(&self) -> bool {
        let order = self.dfs_order();
        order.len() == self.limbs.len() + 1
            && order
                .iter()
                .enumerate()
                .all(|(pos, (node, _))| pos == *node)
    }
}

/// Class stored in a tree-depth attribute for a limb at `depth` (≥ 1).
pub fn depth_class(depth: usize, cardinality: usize) -> usize {
    depth.saturating_sub(1).min(cardinality - 1)
}

pub(crate) fn random_part<R: Rng + ?Sized>(
    schema: &AttributeSchema,
    scope: RowScope,
    depth: usize,
    rng: &mut R,
) -> Part {
    let layout = schema.layout(scope);
    let continuous = layout
        .continuous
        .iter()
        .map(|&c| {
            let (lo, hi) = schema.bounds(c).expect("continuous column");
            rng.random_range(lo..=hi)
        })
        .collect();
    let categorical = layout
        .categorical
        .iter()
        .map(|&c| {
            let card = schema.cardinality(c).expect("categorical column");
            if schema.attribute(c).tree_depth {
                depth_class(depth, card)
            } else {
                rng.random_range(0..card)
            }
        })
        .collect();
    Part {
        continuous,
        categorical,
    }
}

/// Rewrite tree-depth attributes from the current tree shape.
pub(crate) fn refresh_depth_classes(g: &mut MorphologyGenome, schema: &AttributeSchema) {
    let layout = schema.layout(RowScope::Limb);
    let depth_slots: Vec<(usize, usize)> = layout
        .categorical
        .iter()
        .enumerate()
        .filter(|(_, &c)| schema.attribute(c).tree_depth)
        .map(|(slot, &c)| (slot, schema.cardinality(c).unwrap()))
        .collect();
    if depth_slots.is_empty() {
        return;
    }
    if let Some(depths) = g.limb_depths() {
        for (limb, depth) in g.limbs.iter_mut().zip(depths) {
            for &(slot, card) in &depth_slots {
                limb.part.categorical[slot] = depth_class(depth, card);
            }
        }
    }
}

/// Draw a random valid genome in canonical form.
pub fn sample_random<R: Rng + ?Sized>(
    schema: &AttributeSchema,
    space: &DesignSpaceConfig,
    rng: &mut R,
) -> MorphologyGenome {
    let n = space.draw_limb_count(rng);
    let head = random_part(schema, RowScope::Head, 0, rng);
    let mut g = MorphologyGenome::head_only(head);
    let mut depth_of = vec![0usize];
    for j in 0..n {
        let parent = rng.random_range(0..=j);
        let depth = depth_of[parent] + 1;
        depth_of.push(depth);
        g.limbs.push(Limb {
            parent,
            part: random_part(schema, RowScope::Limb, depth, rng),
        });
    }
    g.canonicalize();
    g
}

fn check_part(
    part: &Part,
    layout: &RowLayout,
    schema: &AttributeSchema,
    row: usize,
    depth: Option<usize>,
    out: &mut Vec<Violation>,
) {
    if part.continuous.len() != layout.continuous.len()
        || part.categorical.len() != layout.categorical.len()
    {
        out.push(Violation::WrongArity { row });
        return;
    }
    for (&value, &column) in part.continuous.iter().zip(&layout.continuous) {
        let (lo, hi) = schema.bounds(column).unwrap();
        if !(value >= lo && value <= hi) {
            out.push(Violation::ContinuousOutOfBounds { row, column, value });
        }
    }
    for (&value, &column) in part.categorical.iter().zip(&layout.categorical) {
        let attr = schema.attribute(column);
        let AttributeKind::Categorical { cardinality } = attr.kind else {
            unreachable!()
        };
        if value >= cardinality {
            out.push(Violation::CategoryOutOfRange { row, column, value });
        } else if attr.tree_depth {
            if let Some(d) = depth {
                let expected = depth_class(d, cardinality);
                if expected != value {
                    out.push(Violation::DepthClassMismatch {
                        row,
                        expected,
                        found: value,
                    });
                }
            }
        }
    }
}

/// Every invariant violation of `g` under `schema` and `l_max`. Empty iff valid.
/// Rows are numbered 0 for the head and `j + 1` for `limbs[j]`.
pub fn validate(g: &MorphologyGenome, schema: &AttributeSchema, l_max: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    if g.limbs.len() > l_max {
        out.push(Violation::TooManyLimbs {
            count: g.limbs.len(),
            max: l_max,
        });
    }
    let n = g.limbs.len();
    let mut tree_ok = true;
    for (j, limb) in g.limbs.iter().enumerate() {
        if limb.parent > n {
            out.push(Violation::ParentOutOfRange {
                limb: j + 1,
                parent: limb.parent,
            });
            tree_ok = false;
        }
    }
    if tree_ok {
        for j in 0..n {
            // A limb is fine iff walking up reaches the head within n steps.
            let mut node = j + 1;
            let mut steps = 0;
            while node != 0 && steps <= n {
                node = g.limbs[node - 1].parent;
                steps += 1;
            }
            if node != 0 {
                out.push(Violation::Cycle { limb: j + 1 });
                tree_ok = false;
            }
        }
    }
    let depths = if tree_ok { g.limb_depths() } else { None };
    check_part(
        &g.head,
        schema.layout(RowScope::Head),
        schema,
        0,
        None,
        &mut out,
    );
    for (j, limb) in g.limbs.iter().enumerate() {
        let d = depths.as_ref().map(|d| d[j]);
        check_part(
            &limb.part,
            schema.layout(RowScope::Limb),
            schema,
            j + 1,
            d,
            &mut out,
        );
    }
    out
}
