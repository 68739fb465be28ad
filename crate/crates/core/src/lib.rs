//! Association-bias auditing for embedding spaces.
//!
//! Given two target concept sets (X, Y) and two attribute sets (A, B), the
//! differential association measures how much more strongly X associates
//! with A (versus B) than Y does. A permutation test over the target labels
//! turns it into a one-sided p-value, and the effect size measures the
//! strength of the association.
//!
//! On top of single tests the crate aggregates detection matrices
//! (model × layer × test) into threshold sweeps, per-layer profiles,
//! cumulative strengths and a group-level permutation test comparing two
//! families of models.

pub mod analysis;
pub mod audit;
pub mod cli;
pub mod embedding;
pub mod error;
pub mod fixture;
pub mod io;
pub mod stats;

pub use embedding::{AssociationTest, ConceptSet, Embedding, Role};
pub use error::StatsError;
