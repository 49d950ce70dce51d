use serde::{Deserialize, Serialize};

/// Which row type an attribute belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowScope {
    Head,
    Limb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeKind {
    Continuous { lo: f64, hi: f64 },
    Categorical { cardinality: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub scope: RowScope,
    #[serde(flatten)]
    pub kind: AttributeKind,
    /// Categorical attribute whose value is the limb's tree depth (clamped to
    /// the cardinality) rather than a free choice.
    #[serde(default)]
    pub tree_depth: bool,
}

impl Attribute {
    pub fn continuous(name: &str, scope: RowScope, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            scope,
            kind: AttributeKind::Continuous { lo, hi },
            tree_depth: false,
        }
    }

    pub fn categorical(name: &str, scope: RowScope, cardinality: usize) -> Self {
        Self {
            name: name.to_string(),
            scope,
            kind: AttributeKind::Categorical { cardinality },
            tree_depth: false,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, AttributeKind::Continuous { .. })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("attribute `{0}` has empty or inverted bounds")]
    BadBounds(String),
    #[error("attribute `{0}` has cardinality below 2")]
    BadCardinality(String),
    #[error("depth attribute `{0}` must be a categorical limb attribute")]
    BadDepthAttribute(String),
    #[error("schema has no attributes")]
    Empty,
}

/// Column layout of one row type: the matrix columns holding its continuous
/// and its categorical attributes, each in schema order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowLayout {
    pub continuous: Vec<usize>,
    pub categorical: Vec<usize>,
}

impl RowLayout {
    pub fn width(&self) -> usize {
        self.continuous.len() + self.categorical.len()
    }
}

/// Ordered list of per-row attributes. Every attribute owns exactly one
/// column of the serialized matrix; a categorical column stores the category
/// index as a real number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Attribute>", into = "Vec<Attribute>")]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
    head: RowLayout,
    limb: RowLayout,
}

impl TryFrom<Vec<Attribute>> for AttributeSchema {
    type Error = SchemaError;
    fn try_from(attributes: Vec<Attribute>) -> Result<Self, SchemaError> {
        Self::new(attributes)
    }
}

impl From<AttributeSchema> for Vec<Attribute> {
    fn from(s: AttributeSchema) -> Self {
        s.attributes
    }
}

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self, SchemaError> {
        if attributes.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut head = RowLayout::default();
        let mut limb = RowLayout::default();
        for (col, a) in attributes.iter().enumerate() {
            match a.kind {
                AttributeKind::Continuous { lo, hi } => {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(SchemaError::BadBounds(a.name.clone()));
                    }
                    if a.tree_depth {
                        return Err(SchemaError::BadDepthAttribute(a.name.clone()));
                    }
                }
                AttributeKind::Categorical { cardinality } => {
                    if cardinality < 2 {
                        return Err(SchemaError::BadCardinality(a.name.clone()));
                    }
                    if a.tree_depth && a.scope != RowScope::Limb {
                        return Err(SchemaError::BadDepthAttribute(a.name.clone()));
                    }
                }
            }
            let layout = match a.scope {
                RowScope::Head => &mut head,
                RowScope::Limb => &mut limb,
            };
            if a.is_continuous() {
                layout.continuous.push(col);
            } else {
                layout.categorical.push(col);
            }
        }
        Ok(Self {
            attributes,
            head,
            limb,
        })
    }

    /// The stand-in for the 47-column limb layout: three head attributes,
    /// the named limb attribute families, then generic bounded continuous
    /// parameters up to 47 columns.
    pub fn standard() -> Self {
        use RowScope::{Head, Limb};
        let mut attrs = vec![
            Attribute::categorical("torso_type", Head, 2),
            Attribute::continuous("head_density", Head, 0.5, 1.0),
            Attribute::continuous("head_radius", Head, 0.05, 0.15),
            Attribute::continuous("orientation_x", Limb, -1.0, 1.0),
            Attribute::continuous("orientation_y", Limb, -1.0, 1.0),
            Attribute::continuous("orientation_z", Limb, -1.0, 1.0),
            Attribute::continuous("length", Limb, 0.1, 0.5),
            Attribute::continuous("radius", Limb, 0.02, 0.1),
            Attribute::continuous("joint_gear", Limb, 0.1, 0.3),
            Attribute::categorical("joint_type", Limb, 3),
            Attribute::categorical("joint_angle_bin", Limb, 6),
            Attribute {
                tree_depth: true,
                ..Attribute::categorical("depth_class", Limb, 4)
            },
        ];
        let generic = 47 - attrs.len();
        for i in 0..generic {
            attrs.push(Attribute::continuous(
                &format!("param_{i:02}"),
                Limb,
                0.0,
                1.0,
            ));
        }
        Self::new(attrs).expect("built-in schema is valid")
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn total_columns(&self) -> usize {
        self.attributes.len()
    }

    pub fn layout(&self, scope: RowScope) -> &RowLayout {
        match scope {
            RowScope::Head => &self.head,
            RowScope::Limb => &self.limb,
        }
    }

    pub fn attribute(&self, column: usize) -> &Attribute {
        &self.attributes[column]
    }

    pub fn cardinality(&self, column: usize) -> Option<usize> {
        match self.attributes[column].kind {
            AttributeKind::Categorical { cardinality } => Some(cardinality),
            AttributeKind::Continuous { .. } => None,
        }
    }

    pub fn bounds(&self, column: usize) -> Option<(f64, f64)> {
        match self.attributes[column].kind {
            AttributeKind::Continuous { lo, hi } => Some((lo, hi)),
            AttributeKind::Categorical { .. } => None,
        }
    }
}

impl Default for AttributeSchema {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_has_47_columns() {
        let s = AttributeSchema::default();
        assert_eq!(s.total_columns(), 47);
        assert_eq!(s.layout(RowScope::Head).width(), 3);
        assert_eq!(s.layout(RowScope::Limb).width(), 44);
        assert_eq!(s.layout(RowScope::Limb).categorical.len(), 3);
    }

    #[test]
    fn rejects_bad_attributes() {
        let bad = vec![Attribute::continuous("x", RowScope::Limb, 1.0, 1.0)];
        assert_eq!(
            AttributeSchema::new(bad),
            Err(SchemaError::BadBounds("x".into()))
        );
        let bad = vec![Attribute::categorical("c", RowScope::Limb, 1)];
        assert!(matches!(
            AttributeSchema::new(bad),
            Err(SchemaError::BadCardinality(_))
        ));
    }

    #[test]
    fn schema_serde_round_trip() {
        let s = AttributeSchema::default();
        let json = serde_json::to_string(&s).unwrap();
        let back: AttributeSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
