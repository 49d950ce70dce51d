use serde::{Deserialize, Serialize};

use super::genome::{Limb, MorphologyGenome, Part};
use super::schema::{AttributeSchema, RowLayout, RowScope};

/// Depth token of a padding row.
pub const PADDING_DEPTH: i32 = -1;

/// Fixed-size matrix form of a genome: row 0 is the head, the following
/// rows are limbs in depth-first preorder, the rest is zero padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerializedGenome {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols`.
    pub matrix: Vec<f64>,
    pub mask_cont: Vec<u8>,
    pub mask_cat: Vec<u8>,
    pub depth_tokens: Vec<i32>,
    /// Row index just past the last limb.
    pub eos_index: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SerialError {
    #[error("genome has {count} limbs but only {max} rows are available")]
    LimbOverflow { count: usize, max: usize },
    #[error("genome is not a tree")]
    NotATree,
    #[error("malformed matrix: {0}")]
    MalformedMatrix(String),
}

impl SerializedGenome {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.cols + col]
    }

    #[inline]
    pub fn is_masked(&self, row: usize, col: usize) -> bool {
        let i = row * self.cols + col;
        self.mask_cont[i] != 0 || self.mask_cat[i] != 0
    }

    pub fn limb_rows(&self) -> usize {
        self.eos_index.saturating_sub(1)
    }
}

fn write_row(s: &mut SerializedGenome, row: usize, part: &Part, layout: &RowLayout) {
    let base = row * s.cols;
    for (&v, &c) in part.continuous.iter().zip(&layout.continuous) {
        s.matrix[base + c] = v;
        s.mask_cont[base + c] = 1;
    }
    for (&v, &c) in part.categorical.iter().zip(&layout.categorical) {
        s.matrix[base + c] = v as f64;
        s.mask_cat[base + c] = 1;
    }
}

/// Serialize into `l_max + 1` rows.
pub fn serialize(
    g: &MorphologyGenome,
    schema: &AttributeSchema,
    l_max: usize,
) -> Result<SerializedGenome, SerialError> {
    if g.limbs.len() > l_max {
        return Err(SerialError::LimbOverflow {
            count: g.limbs.len(),
            max: l_max,
        });
    }
    let order = g.dfs_order();
    if order.len() != g.limbs.len() + 1 {
        return Err(SerialError::NotATree);
    }
    let rows = l_max + 1;
    let cols = schema.total_columns();
    let mut s = SerializedGenome {
        rows,
        cols,
        matrix: vec![0.0; rows * cols],
        mask_cont: vec![0; rows * cols],
        mask_cat: vec![0; rows * cols],
        depth_tokens: vec![PADDING_DEPTH; rows],
        eos_index: order.len(),
    };
    for (row, (node, depth)) in order.into_iter().enumerate() {
        let (part, scope) = if node == 0 {
            (&g.head, RowScope::Head)
        } else {
            (&g.limbs[node - 1].part, RowScope::Limb)
        };
        write_row(&mut s, row, part, schema.layout(scope));
        s.depth_tokens[row] = depth as i32;
    }
    Ok(s)
}

fn read_row(
    s: &SerializedGenome,
    row: usize,
    layout: &RowLayout,
    schema: &AttributeSchema,
) -> Result<Part, SerialError> {
    let base = row * s.cols;
    for c in 0..s.cols {
        let want_cont = layout.continuous.contains(&c);
        let want_cat = layout.categorical.contains(&c);
        if (s.mask_cont[base + c] != 0) != want_cont || (s.mask_cat[base + c] != 0) != want_cat {
            return Err(SerialError::MalformedMatrix(format!(
                "mask of row {row} column {c} does not match the schema"
            )));
        }
    }
    let continuous = layout
        .continuous
        .iter()
        .map(|&c| s.matrix[base + c])
        .collect();
    let categorical = layout
        .categorical
        .iter()
        .map(|&c| {
            let v = s.matrix[base + c];
            let card = schema.cardinality(c).unwrap();
            if v.fract() != 0.0 || v < 0.0 || v as usize >= card {
                Err(SerialError::MalformedMatrix(format!(
                    "row {row} column {c} holds {v}, not a category index below {card}"
                )))
            } else {
                Ok(v as usize)
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(Part {
        continuous,
        categorical,
    })
}

/// Inverse of [`serialize`]. The result is in canonical (preorder) form, so
/// `deserialize(serialize(g)) == g` for every canonical genome.
pub fn deserialize(
    s: &SerializedGenome,
    schema: &AttributeSchema,
) -> Result<MorphologyGenome, SerialError> {
    let malformed = |m: String| Err(SerialError::MalformedMatrix(m));
    if s.cols != schema.total_columns() {
        return malformed(format!(
            "{} columns, schema has {}",
            s.cols,
            schema.total_columns()
        ));
    }
    let cells = s.rows * s.cols;
    if s.rows == 0
        || s.matrix.len() != cells
        || s.mask_cont.len() != cells
        || s.mask_cat.len() != cells
        || s.depth_tokens.len() != s.rows
    {
        return malformed("inconsistent dimensions".into());
    }
    if s.eos_index == 0 || s.eos_index > s.rows {
        return malformed(format!("eos index {} out of range", s.eos_index));
    }
    if s.depth_tokens[0] != 0 {
        return malformed("row 0 must have depth 0".into());
    }
    // Preorder depth sequence: parent of row i is the closest earlier row one level up.
    let mut stack: Vec<usize> = vec![0];
    let mut parents = Vec::with_capacity(s.eos_index - 1);
    for row in 1..s.eos_index {
        let d = s.depth_tokens[row];
        let prev = s.depth_tokens[row - 1];
        if d < 1 || d > prev + 1 {
            return malformed(format!("depth {d} at row {row} after depth {prev}"));
        }
        stack.truncate(d as usize);
        parents.push(*stack.last().unwrap());
        stack.push(row);
    }
    for row in s.eos_index..s.rows {
        if s.depth_tokens[row] != PADDING_DEPTH {
            return malformed(format!("padding row {row} has a depth token"));
        }
        let range = row * s.cols..(row + 1) * s.cols;
        if s.matrix[range.clone()].iter().any(|&v| v != 0.0)
            || s.mask_cont[range.clone()].iter().any(|&m| m != 0)
            || s.mask_cat[range].iter().any(|&m| m != 0)
        {
            return malformed(format!("padding row {row} is not empty"));
        }
    }
    let head = read_row(s, 0, schema.layout(RowScope::Head), schema)?;
    let limbs = parents
        .into_iter()
        .enumerate()
        .map(|(j, parent)| {
            Ok(Limb {
                parent,
                part: read_row(s, j + 1, schema.layout(RowScope::Limb), schema)?,
            })
        })
        .collect::<Result<_, SerialError>>()?;
    Ok(MorphologyGenome { head, limbs })
}
