//! Embedding vectors, concept sets and association tests.
//!
//! Vectors are stored as `f32` (the interchange precision) while every
//! derived quantity is computed in `f64`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::StatsError;

/// A single embedding vector with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f32>,
    norm: f64,
}

impl Embedding {
    pub fn new(values: Vec<f32>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptyEmbedding);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite { index });
        }
        let norm = crate::stats::dot(&values, &values).sqrt();
        Ok(Embedding { values, norm })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    /// Euclidean norm, computed once at construction.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Multiplies every component by `factor` (rounded back to `f32`).
    pub fn scaled(&self, factor: f32) -> Result<Self, StatsError> {
        Embedding::new(self.values.iter().map(|v| v * factor).collect())
    }
}

impl From<Embedding> for Vec<f32> {
    fn from(e: Embedding) -> Self {
        e.values
    }
}

/// Which side of an association test a concept set plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Attribute,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::Target => "target",
            Role::Attribute => "attribute",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named, non-empty collection of same-dimension, non-zero embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptSet {
    name: String,
    role: Role,
    vectors: Vec<Embedding>,
}

impl ConceptSet {
    pub fn new(
        name: impl Into<String>,
        role: Role,
        vectors: Vec<Embedding>,
    ) -> Result<Self, StatsError> {
        let name = name.into();
        let first = vectors
            .first()
            .ok_or_else(|| StatsError::EmptySet(name.clone()))?;
        let dim = first.dim();
        for v in &vectors {
            if v.dim() != dim {
                return Err(StatsError::DimensionMismatch {
                    left: dim,
                    right: v.dim(),
                });
            }
            if v.norm() == 0.0 {
                return Err(StatsError::ZeroNorm);
            }
        }
        Ok(ConceptSet {
            name,
            role,
            vectors,
        })
    }

    /// Builds a set straight from raw rows.
    pub fn from_rows(
        name: impl Into<String>,
        role: Role,
        rows: impl IntoIterator<Item = Vec<f32>>,
    ) -> Result<Self, StatsError> {
        let vectors = rows
            .into_iter()
            .map(Embedding::new)
            .collect::<Result<Vec<_>, _>>()?;
        ConceptSet::new(name, role, vectors)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Embedding] {
        &self.vectors
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Embedding> {
        self.vectors.iter()
    }

    pub fn into_vectors(self) -> Vec<Embedding> {
        self.vectors
    }
}

impl<'a> IntoIterator for &'a ConceptSet {
    type Item = &'a Embedding;
    type IntoIter = std::slice::Iter<'a, Embedding>;

    fn into_iter(self) -> Self::IntoIter {
        self.vectors.iter()
    }
}

/// Two target sets and two attribute sets sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationTest {
    name: String,
    x: ConceptSet,
    y: ConceptSet,
    a: ConceptSet,
    b: ConceptSet,
    tags: Vec<String>,
}

impl AssociationTest {
    pub fn new(
        name: impl Into<String>,
        x: ConceptSet,
        y: ConceptSet,
        a: ConceptSet,
        b: ConceptSet,
    ) -> Result<Self, StatsError> {
        for (set, expected) in [
            (&x, Role::Target),
            (&y, Role::Target),
            (&a, Role::Attribute),
            (&b, Role::Attribute),
        ] {
            if set.role() != expected {
                return Err(StatsError::RoleMismatch {
                    name: set.name().to_string(),
                    expected: expected.as_str(),
                    actual: set.role().as_str(),
                });
            }
        }
        let dim = x.dim();
        for set in [&y, &a, &b] {
            if set.dim() != dim {
                return Err(StatsError::DimensionMismatch {
                    left: dim,
                    right: set.dim(),
                });
            }
        }
        if x.name() == y.name() {
            return Err(StatsError::DuplicateName(x.name().to_string()));
        }
        if a.name() == b.name() {
            return Err(StatsError::DuplicateName(a.name().to_string()));
        }
        Ok(AssociationTest {
            name: name.into(),
            x,
            y,
            a,
            b,
            tags: Vec::new(),
        })
    }

    pub fn with_tags(mut self, tags: Vec<String>) -> Self {
        self.tags = tags;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn x(&self) -> &ConceptSet {
        &self.x
    }

    pub fn y(&self) -> &ConceptSet {
        &self.y
    }

    pub fn a(&self) -> &ConceptSet {
        &self.a
    }

    pub fn b(&self) -> &ConceptSet {
        &self.b
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }
}
