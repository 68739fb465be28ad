//! Analytics over a detection matrix: bias counts, threshold sweeps,
//! cumulative strength, per-layer profiles and group comparisons.

mod grid;
mod groups;

pub use grid::ThresholdGrid;
pub use groups::{compare_groups, compare_model_groups, GroupComparisonOutcome, GroupTestConfig};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::ReplicateOutcome;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("threshold {0} is outside (0, 1)")]
    InvalidThreshold(f64),

    #[error("invalid threshold grid: {0}")]
    InvalidGrid(String),

    #[error("group comparison: {0}")]
    InvalidGroups(String),

    #[error("duplicate entry for ({model}, {layer}, {test})")]
    DuplicateEntry {
        model: String,
        layer: String,
        test: String,
    },
}

fn check_threshold(p_t: f64) -> Result<(), AnalysisError> {
    if p_t > 0.0 && p_t < 1.0 {
        Ok(())
    } else {
        Err(AnalysisError::InvalidThreshold(p_t))
    }
}

/// Key of one detection-matrix cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntryKey {
    pub model: String,
    pub layer: String,
    pub test: String,
}

impl EntryKey {
    pub fn new(
        model: impl Into<String>,
        layer: impl Into<String>,
        test: impl Into<String>,
    ) -> Self {
        EntryKey {
            model: model.into(),
            layer: layer.into(),
            test: test.into(),
        }
    }
}

/// Replicate-averaged outcomes indexed by (model, layer, test).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionMatrix {
    entries: BTreeMap<EntryKey, ReplicateOutcome>,
    layer_order: Vec<String>,
}

impl DetectionMatrix {
    pub fn new(layer_order: Vec<String>) -> Self {
        DetectionMatrix {
            entries: BTreeMap::new(),
            layer_order,
        }
    }

    pub fn insert(
        &mut self,
        key: EntryKey,
        outcome: ReplicateOutcome,
    ) -> Result<(), AnalysisError> {
        if !self.layer_order.contains(&key.layer) {
            return Err(AnalysisError::UnknownLayer(key.layer));
        }
        if self.entries.contains_key(&key) {
            return Err(AnalysisError::DuplicateEntry {
                model: key.model,
                layer: key.layer,
                test: key.test,
            });
        }
        self.entries.insert(key, outcome);
        Ok(())
    }

    pub fn layer_order(&self) -> &[String] {
        &self.layer_order
    }

    pub fn entries(&self) -> impl Iterator<Item = (&EntryKey, &ReplicateOutcome)> {
        self.entries.iter()
    }

    pub fn get(&self, key: &EntryKey) -> Option<&ReplicateOutcome> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Model ids in sorted order.
    pub fn models(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|k| k.model.as_str()).collect()
    }

    pub fn has_model(&self, model: &str) -> bool {
        self.entries.keys().any(|k| k.model == model)
    }

    fn require_layer(&self, layer: &str) -> Result<(), AnalysisError> {
        if self.layer_order.iter().any(|l| l == layer) {
            Ok(())
        } else {
            Err(AnalysisError::UnknownLayer(layer.to_string()))
        }
    }

    /// Outcomes of every test for one (model, layer) cell.
    pub fn outcomes<'a>(
        &'a self,
        model: &'a str,
        layer: &'a str,
    ) -> impl Iterator<Item = &'a ReplicateOutcome> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k.model == model && k.layer == layer)
            .map(|(_, v)| v)
    }

    /// Bias counts of `model` at `layer` for every grid threshold.
    pub fn count_curve(
        &self,
        model: &str,
        layer: &str,
        grid: &ThresholdGrid,
    ) -> Result<Vec<usize>, AnalysisError> {
        self.require_layer(layer)?;
        if !self.has_model(model) {
            return Err(AnalysisError::UnknownModel(model.to_string()));
        }
        let mut ps: Vec<f64> = self.outcomes(model, layer).map(|o| o.mean_p).collect();
        ps.sort_by(f64::total_cmp);
        // Counts are `#{p < p_t}`, i.e. a lower-bound search on the sorted p-values.
        Ok(grid
            .values()
            .iter()
            .map(|&t| ps.partition_point(|&p| p < t))
            .collect())
    }
}

/// Number of outcomes whose averaged p-value is strictly below `p_t`.
pub fn count_biases<'a>(
    outcomes: impl IntoIterator<Item = &'a ReplicateOutcome>,
    p_t: f64,
) -> Result<usize, AnalysisError> {
    check_threshold(p_t)?;
    Ok(outcomes.into_iter().filter(|o| o.mean_p < p_t).count())
}

/// Signed sum of the averaged d-values of the outcomes detected at `p_t`.
pub fn cumulative_strength<'a>(
    outcomes: impl IntoIterator<Item = &'a ReplicateOutcome>,
    p_t: f64,
) -> Result<f64, AnalysisError> {
    check_threshold(p_t)?;
    Ok(outcomes
        .into_iter()
        .filter(|o| o.mean_p < p_t)
        .map(|o| o.mean_d)
        .sum())
}

/// Bias counts of every model at one layer over a threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub layer: String,
    pub grid: Vec<f64>,
    pub per_model: BTreeMap<String, Vec<usize>>,
}

pub fn threshold_sweep(
    matrix: &DetectionMatrix,
    layer: &str,
    grid: &ThresholdGrid,
) -> Result<SweepResult, AnalysisError> {
    matrix.require_layer(layer)?;
    let models: BTreeSet<&str> = matrix
        .entries
        .keys()
        .filter(|k| k.layer == layer)
        .map(|k| k.model.as_str())
        .collect();
    let per_model = models
        .into_iter()
        .map(|m| Ok((m.to_string(), matrix.count_curve(m, layer, grid)?)))
        .collect::<Result<_, AnalysisError>>()?;
    Ok(SweepResult {
        layer: layer.to_string(),
        grid: grid.values().to_vec(),
        per_model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub layer: String,
    pub bias_count: usize,
    pub cumulative_strength: f64,
}

/// Per-layer count and cumulative strength for one model, in layer order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub model: String,
    pub p_threshold: f64,
    pub layers: Vec<LayerSummary>,
}

pub fn layer_profile(
    matrix: &DetectionMatrix,
    model: &str,
    p_t: f64,
) -> Result<LayerProfile, AnalysisError> {
    check_threshold(p_t)?;
    if !matrix.has_model(model) {
        return Err(AnalysisError::UnknownModel(model.to_string()));
    }
    let layers = matrix
        .layer_order
        .iter()
        .map(|layer| {
            Ok(LayerSummary {
                layer: layer.clone(),
                bias_count: count_biases(matrix.outcomes(model, layer), p_t)?,
                cumulative_strength: cumulative_strength(matrix.outcomes(model, layer), p_t)?,
            })
        })
        .collect::<Result<_, AnalysisError>>()?;
    Ok(LayerProfile {
        model: model.to_string(),
        p_threshold: p_t,
        layers,
    })
}
