//! End-to-end audit orchestration: run every (model, layer, test) of a
//! manifest, pool instance groups, and derive the report analytics.

use std::collections::BTreeMap;

use log::{debug, info};
use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{
    compare_model_groups, layer_profile, threshold_sweep, AnalysisError, DetectionMatrix, EntryKey,
    GroupTestConfig, ThresholdGrid,
};
use crate::error::StatsError;
use crate::io::manifest::{AuditManifest, LoadError};
use crate::io::report::{AuditReport, GroupComparisonRecord, ReportSettings};
use crate::stats::{run_replicates, PermutationMode, ReplicateOutcome};

/// Command-line overrides of manifest settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub permutations: Option<u64>,
    pub replicates: Option<usize>,
    pub p_threshold: Option<f64>,
    pub mode: Option<PermutationMode>,
}

impl Overrides {
    pub fn apply(&self, manifest: &mut AuditManifest) -> Result<(), String> {
        if let Some(seed) = self.seed {
            manifest.permutation.seed = seed;
        }
        if let Some(n) = self.permutations {
            if n == 0 {
                return Err("--permutations must be positive".into());
            }
            manifest.permutation.max_permutations = n;
        }
        if let Some(r) = self.replicates {
            if r == 0 {
                return Err("--replicates must be positive".into());
            }
            manifest.replicates = r;
        }
        if let Some(p) = self.p_threshold {
            if !(p > 0.0 && p < 1.0) {
                return Err(format!("--p-threshold {p} is outside (0, 1)"));
            }
            manifest.p_threshold = p;
        }
        if let Some(mode) = self.mode {
            manifest.permutation.mode = mode;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    /// `item` is `model/layer/test`.
    #[error("{item}: {source}")]
    Load {
        item: String,
        source: Box<LoadError>,
    },

    #[error("{item}: {source}")]
    Stats { item: String, source: StatsError },

    #[error("worker pool: {0}")]
    Pool(String),

    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl AuditError {
    /// Whether the failure stems from the inputs rather than from the audit itself.
    pub fn is_input_error(&self) -> bool {
        matches!(self, AuditError::Load { .. })
    }
}

/// Detection matrix of a completed audit plus test tags.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRun {
    pub matrix: DetectionMatrix,
    pub tags: BTreeMap<String, Vec<String>>,
}

/// Runs the replicated permutation test for every work item of `manifest`
/// on a pool of `jobs` threads (0 = one per core). The result does not
/// depend on `jobs`.
pub fn run_audit(manifest: &AuditManifest, jobs: usize) -> Result<AuditRun, AuditError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| AuditError::Pool(e.to_string()))?;
    let items = manifest.work_items();
    info!(
        "running {} work items ({} models, {} layers, {} tests) with {} replicates",
        items.len(),
        manifest.models.len(),
        manifest.layer_order.len(),
        manifest.tests.len(),
        manifest.replicates
    );

    let results: Vec<(EntryKey, ReplicateOutcome)> = pool.install(|| {
        items
            .par_iter()
            .map(|&(mi, layer, ti)| {
                let model = &manifest.models[mi];
                let spec = &manifest.tests[ti];
                let key = EntryKey::new(&model.id, layer, &spec.name);
                let item = || format!("{}/{}/{}", key.model, key.layer, key.test);
                let test =
                    manifest
                        .load_test(model, layer, spec)
                        .map_err(|source| AuditError::Load {
                            item: item(),
                            source: Box::new(source),
                        })?;
                let outcome = run_replicates(&test, &manifest.permutation, manifest.replicates)
                    .map_err(|source| AuditError::Stats {
                        item: item(),
                        source,
                    })?;
                let first = &outcome.per_replicate[0];
                debug!(
                    "{}/{}/{}: mode={} permutations={} ties={} mean_p={} mean_d={}",
                    key.model,
                    key.layer,
                    key.test,
                    first.mode_used,
                    first.n_permutations,
                    outcome.total_ties(),
                    outcome.mean_p,
                    outcome.mean_d
                );
                Ok((key, outcome))
            })
            .collect::<Result<Vec<_>, AuditError>>()
    })?;

    let exact = results
        .iter()
        .filter(|(_, o)| o.per_replicate[0].mode_used == crate::stats::SamplingMode::Exact)
        .count();
    info!(
        "{} tests ran in exact mode, {} in Monte Carlo mode",
        exact,
        results.len() - exact
    );

    let matrix = pool_instances(manifest, results)?;
    let tags = manifest
        .tests
        .iter()
        .map(|t| (t.name.clone(), t.tags.clone()))
        .collect();
    Ok(AuditRun { matrix, tags })
}

/// Replaces the members of every instance group by one pooled entry per
/// (layer, test) keyed by the group id.
fn pool_instances(
    manifest: &AuditManifest,
    results: Vec<(EntryKey, ReplicateOutcome)>,
) -> Result<DetectionMatrix, AuditError> {
    let group_of: BTreeMap<&str, &str> = manifest
        .instance_groups
        .iter()
        .flat_map(|g| g.members.iter().map(move |m| (m.as_str(), g.id.as_str())))
        .collect();
    let mut matrix = DetectionMatrix::new(manifest.layer_order.clone());
    let mut pooled: BTreeMap<EntryKey, Vec<(usize, ReplicateOutcome)>> = BTreeMap::new();
    for (key, outcome) in results {
        match group_of.get(key.model.as_str()) {
            Some(group) => {
                let group_cfg = manifest
                    .instance_groups
                    .iter()
                    .find(|g| g.id == *group)
                    .expect("group exists");
                let rank = group_cfg
                    .members
                    .iter()
                    .position(|m| *m == key.model)
                    .expect("member exists");
                pooled
                    .entry(EntryKey::new(*group, key.layer, key.test))
                    .or_default()
                    .push((rank, outcome));
            }
            None => matrix.insert(key, outcome)?,
        }
    }
    for (key, mut members) in pooled {
        members.sort_by_key(|(rank, _)| *rank);
        let outcome = ReplicateOutcome::pool(members.iter().map(|(_, o)| o))
            .expect("instance groups have members");
        matrix.insert(key, outcome)?;
    }
    Ok(matrix)
}

/// Builds the full report for a completed audit: cells, a sweep per layer,
/// a layer profile per model and every declared group comparison.
pub fn build_report(manifest: &AuditManifest, run: &AuditRun) -> Result<AuditReport, AuditError> {
    let settings = ReportSettings {
        permutation: manifest.permutation,
        replicates: manifest.replicates,
        p_threshold: manifest.p_threshold,
        threshold_grid: manifest.threshold_grid.clone(),
        comparison_grid: manifest.comparison_grid.clone(),
    };
    let mut report = AuditReport::new(settings, manifest.layer_order.clone())
        .with_matrix(&run.matrix, &run.tags);
    report.groups = manifest.groups.clone();
    report.sweeps = manifest
        .layer_order
        .iter()
        .map(|layer| threshold_sweep(&run.matrix, layer, &manifest.threshold_grid))
        .collect::<Result<_, _>>()?;
    report.layer_profiles = run
        .matrix
        .models()
        .into_iter()
        .map(|m| layer_profile(&run.matrix, m, manifest.p_threshold))
        .collect::<Result<_, _>>()?;
    let default_layer = manifest.layer_order.last().cloned().unwrap_or_default();
    for c in &manifest.comparisons {
        let layer = c.layer.clone().unwrap_or_else(|| default_layer.clone());
        report.group_comparisons.push(compare_named_groups(
            &run.matrix,
            &manifest.groups,
            &c.group_a,
            &c.group_b,
            &layer,
            &manifest.comparison_grid,
            manifest.permutation.seed,
        )?);
    }
    Ok(report)
}

/// Compares two named groups of models on one layer.
pub fn compare_named_groups(
    matrix: &DetectionMatrix,
    groups: &BTreeMap<String, Vec<String>>,
    group_a: &str,
    group_b: &str,
    layer: &str,
    grid: &ThresholdGrid,
    seed: u64,
) -> Result<GroupComparisonRecord, AnalysisError> {
    let members = |g: &str| {
        groups
            .get(g)
            .cloned()
            .ok_or_else(|| AnalysisError::InvalidGroups(format!("unknown group `{g}`")))
    };
    let (members_a, members_b) = (members(group_a)?, members(group_b)?);
    let cfg = GroupTestConfig {
        seed,
        ..GroupTestConfig::default()
    };
    let outcome = compare_model_groups(matrix, layer, &members_a, &members_b, grid, &cfg)?;
    Ok(GroupComparisonRecord {
        group_a: group_a.to_string(),
        group_b: group_b.to_string(),
        layer: layer.to_string(),
        members_a,
        members_b,
        outcome,
    })
}
