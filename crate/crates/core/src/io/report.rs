//! Audit reports: a JSON document with every cell of the detection matrix
//! plus the derived analytics, and a flat CSV projection of the cells.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    AnalysisError, DetectionMatrix, EntryKey, GroupComparisonOutcome, LayerProfile, SweepResult,
    ThresholdGrid,
};
use crate::stats::{PermutationConfig, ReplicateOutcome, SamplingMode, TestOutcome};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error("report entries are inconsistent: {0}")]
    Inconsistent(#[from] AnalysisError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub permutation: PermutationConfig,
    pub replicates: usize,
    pub p_threshold: f64,
    pub threshold_grid: ThresholdGrid,
    pub comparison_grid: ThresholdGrid,
}

/// One (model, layer, test) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub model: String,
    pub layer: String,
    pub test: String,
    pub tags: Vec<String>,
    /// Mean observed statistic over the replicates.
    pub s_obs: f64,
    pub mean_p: f64,
    pub mean_d: f64,
    pub n_permutations: u64,
    pub mode: SamplingMode,
    /// Ties summed over the replicates.
    pub tie_count: u64,
    pub n_replicates: usize,
    pub per_replicate: Vec<TestOutcome>,
}

impl ReportEntry {
    pub fn new(key: &EntryKey, tags: Vec<String>, outcome: &ReplicateOutcome) -> Self {
        let first = &outcome.per_replicate[0];
        ReportEntry {
            model: key.model.clone(),
            layer: key.layer.clone(),
            test: key.test.clone(),
            tags,
            s_obs: outcome.mean_s_obs(),
            mean_p: outcome.mean_p,
            mean_d: outcome.mean_d,
            n_permutations: first.n_permutations,
            mode: first.mode_used,
            tie_count: outcome.total_ties(),
            n_replicates: outcome.n_replicates,
            per_replicate: outcome.per_replicate.clone(),
        }
    }

    pub fn key(&self) -> EntryKey {
        EntryKey::new(&self.model, &self.layer, &self.test)
    }

    pub fn outcome(&self) -> ReplicateOutcome {
        ReplicateOutcome {
            mean_p: self.mean_p,
            mean_d: self.mean_d,
            per_replicate: self.per_replicate.clone(),
            n_replicates: self.n_replicates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparisonRecord {
    pub group_a: String,
    pub group_b: String,
    pub layer: String,
    pub members_a: Vec<String>,
    pub members_b: Vec<String>,
    pub outcome: GroupComparisonOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub format_version: u32,
    pub settings: ReportSettings,
    pub layer_order: Vec<String>,
    /// Named model groups available for comparisons.
    pub groups: BTreeMap<String, Vec<String>>,
    /// Sorted by (model, layer, test).
    pub entries: Vec<ReportEntry>,
    pub sweeps: Vec<SweepResult>,
    pub layer_profiles: Vec<LayerProfile>,
    pub group_comparisons: Vec<GroupComparisonRecord>,
}

impl AuditReport {
    pub fn new(settings: ReportSettings, layer_order: Vec<String>) -> Self {
        AuditReport {
            format_version: REPORT_VERSION,
            settings,
            layer_order,
            groups: BTreeMap::new(),
            entries: Vec::new(),
            sweeps: Vec::new(),
            layer_profiles: Vec::new(),
            group_comparisons: Vec::new(),
        }
    }

    /// Fills `entries` from a detection matrix.
    pub fn with_matrix(
        mut self,
        matrix: &DetectionMatrix,
        tags: &BTreeMap<String, Vec<String>>,
    ) -> Self {
        self.entries = matrix
            .entries()
            .map(|(k, o)| ReportEntry::new(k, tags.get(&k.test).cloned().unwrap_or_default(), o))
            .collect();
        self
    }

    /// Rebuilds the detection matrix recorded in the report.
    pub fn to_matrix(&self) -> Result<DetectionMatrix, ReportError> {
        let mut m = DetectionMatrix::new(self.layer_order.clone());
        for e in &self.entries {
            m.insert(e.key(), e.outcome())?;
        }
        Ok(m)
    }

    pub fn tags(&self) -> BTreeMap<String, Vec<String>> {
        self.entries
            .iter()
            .map(|e| (e.test.clone(), e.tags.clone()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read_json(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| ReportError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// CSV projection: one row per (model, layer, test).
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for e in &self.entries {
            w.write_record([
                e.model.clone(),
                e.layer.clone(),
                e.test.clone(),
                e.tags.join(";"),
                e.s_obs.to_string(),
                e.mean_p.to_string(),
                e.mean_d.to_string(),
                e.n_permutations.to_string(),
                e.mode.to_string(),
                e.tie_count.to_string(),
                e.n_replicates.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "model",
    "layer",
    "test",
    "tags",
    "s_obs",
    "mean_p",
    "mean_d",
    "n_permutations",
    "mode",
    "tie_count",
    "n_replicates",
];

/// Writes a serialisable value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), ReportError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| ReportError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    s.push('\n');
    fs::write(path, s).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_report(
    report: &AuditReport,
    format: ReportFormat,
    path: &Path,
) -> Result<(), ReportError> {
    let text = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.to_csv().map_err(|source| ReportError::Csv {
            path: path.to_path_buf(),
            source,
        })?,
    };
    fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> ReportSettings {
        ReportSettings {
            permutation: PermutationConfig::default(),
            replicates: 3,
            p_threshold: 0.01,
            threshold_grid: ThresholdGrid::default_sweep(),
            comparison_grid: ThresholdGrid::new(vec![0.01, 0.05]).unwrap(),
        }
    }

    fn sample_report() -> AuditReport {
        let mut m = DetectionMatrix::new(vec!["block2".into(), "gap".into()]);
        let o = |p: f64, d: f64| TestOutcome {
            s_obs: 0.1 + d,
            p,
            d,
            n_permutations: 10_000,
            mode_used: SamplingMode::MonteCarlo,
            tie_count: 0,
        };
        m.insert(
            EntryKey::new("simclr", "gap", "t1"),
            ReplicateOutcome::from_outcomes(vec![o(0.0031, 1.0 / 3.0), o(0.0029, 0.7)]),
        )
        .unwrap();
        m.insert(
            EntryKey::new("byol", "block2", "t2"),
            ReplicateOutcome::from_outcomes(vec![o(0.2, -0.1)]),
        )
        .unwrap();
        let tags = BTreeMap::from([(
            "t1".to_string(),
            vec!["race".to_string(), "intersectional".to_string()],
        )]);
        AuditReport::new(settings(), m.layer_order().to_vec()).with_matrix(&m, &tags)
    }

    #[test]
    fn empty_report_is_valid_json() {
        let r = AuditReport::new(settings(), vec![]);
        let back = AuditReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(back.entries.is_empty() && back.sweeps.is_empty());
        assert_eq!(r.to_csv().unwrap().lines().count(), 1);
    }

    #[test]
    fn json_emit_parse_emit_is_byte_identical() {
        let r = sample_report();
        let first = r.to_json();
        let second = AuditReport::from_json(&first).unwrap().to_json();
        assert_eq!(first, second);
        assert_eq!(AuditReport::from_json(&first).unwrap(), r);
    }

    #[test]
    fn entries_sorted_and_matrix_round_trips() {
        let r = sample_report();
        let models: Vec<_> = r.entries.iter().map(|e| e.model.as_str()).collect();
        assert_eq!(models, vec!["byol", "simclr"]);
        let m = r.to_matrix().unwrap();
        assert_eq!(m.len(), 2);
        let e = m.get(&EntryKey::new("simclr", "gap", "t1")).unwrap();
        assert_eq!(e.n_replicates, 2);
    }

    #[test]
    fn csv_projection_preserves_tuples() {
        let r = sample_report();
        let text = r.to_csv().unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), r.entries.len());
        for (row, e) in rows.iter().zip(&r.entries) {
            assert_eq!(&row[0], e.model);
            assert_eq!(&row[1], e.layer);
            assert_eq!(&row[2], e.test);
            assert_eq!(row[5].parse::<f64>().unwrap().to_bits(), e.mean_p.to_bits());
            assert_eq!(row[6].parse::<f64>().unwrap().to_bits(), e.mean_d.to_bits());
        }
        assert_eq!(&rows[1][3], "race;intersectional");
    }
}
