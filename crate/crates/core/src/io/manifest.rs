//! The audit manifest: which models, layers and tests to run, and how.
//!
//! ```json
//! {
//!   "models": [{"id": "simclr", "layers": {"gap": "emb/simclr/gap"}}],
//!   "layer_order": ["gap"],
//!   "tests": [{"name": "insect-flower", "tags": ["valence"],
//!              "x": "insects.emb", "y": "flowers.emb",
//!              "a": {"name": "pleasant", "file": "pleasant.emb"}, "b": "unpleasant.emb"}],
//!   "permutation": {"max_permutations": 10000, "seed": 42, "mode": "auto"},
//!   "replicates": 3,
//!   "instance_groups": [{"id": "random", "members": ["random_1", "random_2", "random_3"]}],
//!   "threshold_grid": {"scale": "log", "start": 1e-4, "stop": 1e-1, "points": 31},
//!   "comparison_grid": {"values": [0.01, 0.05]},
//!   "p_threshold": 0.01,
//!   "groups": {"contrastive": ["simclr"], "other": ["random"]},
//!   "comparisons": [{"group_a": "contrastive", "group_b": "other", "layer": "gap"}]
//! }
//! ```
//!
//! Layer directories are relative to the manifest's directory; concept files
//! are relative to each layer directory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::analysis::ThresholdGrid;
use crate::embedding::{AssociationTest, Role};
use crate::io::emb::{read_embeddings, read_rows, EmbeddingFileError};
use crate::stats::{PermutationConfig, PermutationMode};

pub const DEFAULT_REPLICATES: usize = 3;
pub const DEFAULT_P_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: malformed JSON: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("{}: {} violation(s):\n{}", path.display(), violations.len(), Bullets(violations))]
    Invalid {
        path: PathBuf,
        violations: Vec<String>,
    },
}

struct Bullets<'a>(&'a [String]);

impl fmt::Display for Bullets<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    models: Option<Vec<RawModel>>,
    layer_order: Option<Vec<String>>,
    tests: Option<Vec<RawTest>>,
    #[serde(default)]
    permutation: RawPermutation,
    replicates: Option<usize>,
    #[serde(default)]
    instance_groups: Vec<InstanceGroup>,
    threshold_grid: Option<GridSpec>,
    comparison_grid: Option<GridSpec>,
    p_threshold: Option<f64>,
    #[serde(default)]
    groups: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    comparisons: Vec<ComparisonSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    id: String,
    layers: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPermutation {
    max_permutations: Option<u64>,
    seed: Option<u64>,
    mode: Option<PermutationMode>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTest {
    name: String,
    #[serde(default)]
    tags: Vec<String>,
    x: RawConcept,
    y: RawConcept,
    a: RawConcept,
    b: RawConcept,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawConcept {
    File(PathBuf),
    Named { name: String, file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScale {
    Log,
    Linear,
}

/// A threshold grid as written in the manifest.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values {
        values: Vec<f64>,
    },
    Range {
        scale: GridScale,
        start: f64,
        stop: f64,
        points: usize,
    },
}

impl GridSpec {
    pub fn build(&self) -> Result<ThresholdGrid, crate::analysis::AnalysisError> {
        match self {
            GridSpec::Values { values } => ThresholdGrid::new(values.clone()),
            GridSpec::Range {
                scale: GridScale::Log,
                start,
                stop,
                points,
            } => ThresholdGrid::log_spaced(*start, *stop, *points),
            GridSpec::Range {
                scale: GridScale::Linear,
                start,
                stop,
                points,
            } => ThresholdGrid::linear(*start, *stop, *points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceGroup {
    pub id: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    pub group_a: String,
    pub group_b: String,
    #[serde(default)]
    pub layer: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub id: String,
    /// Layer id → resolved embedding directory.
    pub layers: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptRef {
    pub name: String,
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSpec {
    pub name: String,
    pub tags: Vec<String>,
    pub x: ConceptRef,
    pub y: ConceptRef,
    pub a: ConceptRef,
    pub b: ConceptRef,
}

impl TestSpec {
    fn concepts(&self) -> [(&ConceptRef, Role); 4] {
        [
            (&self.x, Role::Target),
            (&self.y, Role::Target),
            (&self.a, Role::Attribute),
            (&self.b, Role::Attribute),
        ]
    }
}

/// A validated manifest with defaults applied and paths resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditManifest {
    pub path: PathBuf,
    pub models: Vec<ModelSpec>,
    pub layer_order: Vec<String>,
    pub tests: Vec<TestSpec>,
    pub permutation: PermutationConfig,
    pub replicates: usize,
    pub instance_groups: Vec<InstanceGroup>,
    pub threshold_grid: ThresholdGrid,
    pub comparison_grid: ThresholdGrid,
    pub p_threshold: f64,
    pub groups: BTreeMap<String, Vec<String>>,
    pub comparisons: Vec<ComparisonSpec>,
}

fn concept_ref(raw: RawConcept) -> ConceptRef {
    match raw {
        RawConcept::Named { name, file } => ConceptRef { name, file },
        RawConcept::File(file) => ConceptRef {
            name: file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            file,
        },
    }
}

fn duplicates<'a>(items: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    let mut dups = BTreeSet::new();
    for item in items {
        if !seen.insert(item) {
            dups.insert(item);
        }
    }
    dups.into_iter().collect()
}

/// Reads, parses and fully validates a manifest, including every
/// referenced embedding file.
pub fn parse_manifest(path: &Path) -> Result<AuditManifest, ManifestError> {
    let manifest = AuditManifest::load(path)?;
    let violations = manifest.check_files();
    if violations.is_empty() {
        Ok(manifest)
    } else {
        Err(ManifestError::Invalid {
            path: path.to_path_buf(),
            violations,
        })
    }
}

impl AuditManifest {
    /// Reads and structurally validates a manifest without touching the
    /// embedding files.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    /// Parses manifest text; relative paths resolve against `path`'s directory.
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ManifestError> {
        let raw: RawManifest =
            serde_json::from_str(text).map_err(|source| ManifestError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let mut v: Vec<String> = Vec::new();

        let layer_order = match raw.layer_order {
            Some(l) if !l.is_empty() => l,
            Some(_) => {
                v.push("layer_order: must list at least one layer".into());
                Vec::new()
            }
            None => {
                v.push("layer_order: required field is missing".into());
                Vec::new()
            }
        };
        for d in duplicates(layer_order.iter().map(String::as_str)) {
            v.push(format!("layer_order: duplicate layer `{d}`"));
        }

        let raw_models = match raw.models {
            Some(m) if !m.is_empty() => m,
            Some(_) => {
                v.push("models: must list at least one model".into());
                Vec::new()
            }
            None => {
                v.push("models: required field is missing".into());
                Vec::new()
            }
        };
        for d in duplicates(raw_models.iter().map(|m| m.id.as_str())) {
            v.push(format!("models: duplicate model id `{d}`"));
        }
        let mut models = Vec::with_capacity(raw_models.len());
        for m in raw_models {
            if m.id.is_empty() {
                v.push("models: empty model id".into());
            }
            if m.layers.is_empty() {
                v.push(format!("models.{}: no layers declared", m.id));
            }
            for layer in m.layers.keys() {
                if !layer_order.contains(layer) {
                    v.push(format!(
                        "models.{}: layer `{layer}` is not in layer_order",
                        m.id
                    ));
                }
            }
            models.push(ModelSpec {
                id: m.id,
                layers: m
                    .layers
                    .into_iter()
                    .map(|(l, dir)| (l, base.join(dir)))
                    .collect(),
            });
        }

        let raw_tests = match raw.tests {
            Some(t) if !t.is_empty() => t,
            Some(_) => {
                v.push("tests: must list at least one test".into());
                Vec::new()
            }
            None => {
                v.push("tests: required field is missing".into());
                Vec::new()
            }
        };
        for d in duplicates(raw_tests.iter().map(|t| t.name.as_str())) {
            v.push(format!("tests: duplicate test name `{d}`"));
        }
        let tests: Vec<TestSpec> = raw_tests
            .into_iter()
            .map(|t| TestSpec {
                name: t.name,
                tags: t.tags,
                x: concept_ref(t.x),
                y: concept_ref(t.y),
                a: concept_ref(t.a),
                b: concept_ref(t.b),
            })
            .collect();
        for t in &tests {
            if t.x.name == t.y.name {
                v.push(format!(
                    "tests.{}: X and Y share the name `{}`",
                    t.name, t.x.name
                ));
            }
            if t.a.name == t.b.name {
                v.push(format!(
                    "tests.{}: A and B share the name `{}`",
                    t.name, t.a.name
                ));
            }
        }

        let defaults = PermutationConfig::default();
        let permutation = PermutationConfig {
            max_permutations: raw
                .permutation
                .max_permutations
                .unwrap_or(defaults.max_permutations),
            seed: raw.permutation.seed.unwrap_or(defaults.seed),
            mode: raw.permutation.mode.unwrap_or(defaults.mode),
        };
        if permutation.max_permutations == 0 {
            v.push("permutation.max_permutations: must be positive".into());
        }
        let replicates = raw.replicates.unwrap_or(DEFAULT_REPLICATES);
        if replicates == 0 {
            v.push("replicates: must be positive".into());
        }

        let model_ids: BTreeSet<&str> = models.iter().map(|m| m.id.as_str()).collect();
        let mut grouped: BTreeSet<&str> = BTreeSet::new();
        for d in duplicates(raw.instance_groups.iter().map(|g| g.id.as_str())) {
            v.push(format!("instance_groups: duplicate id `{d}`"));
        }
        for g in &raw.instance_groups {
            if g.members.is_empty() {
                v.push(format!("instance_groups.{}: no members", g.id));
            }
            if model_ids.contains(g.id.as_str()) {
                v.push(format!(
                    "instance_groups.{}: id collides with a model id",
                    g.id
                ));
            }
            for m in &g.members {
                if !model_ids.contains(m.as_str()) {
                    v.push(format!("instance_groups.{}: unknown model `{m}`", g.id));
                } else if !grouped.insert(m) {
                    v.push(format!(
                        "instance_groups.{}: model `{m}` is in more than one group",
                        g.id
                    ));
                }
            }
            let layer_sets: BTreeSet<Vec<&String>> = models
                .iter()
                .filter(|m| g.members.contains(&m.id))
                .map(|m| m.layers.keys().collect())
                .collect();
            if layer_sets.len() > 1 {
                v.push(format!(
                    "instance_groups.{}: members declare different layers",
                    g.id
                ));
            }
        }

        let mut grid = |spec: Option<GridSpec>, name: &str, default: ThresholdGrid| match spec {
            None => default,
            Some(s) => s.build().unwrap_or_else(|e| {
                v.push(format!("{name}: {e}"));
                default
            }),
        };
        let threshold_grid = grid(
            raw.threshold_grid,
            "threshold_grid",
            ThresholdGrid::default_sweep(),
        );
        let comparison_grid = grid(
            raw.comparison_grid,
            "comparison_grid",
            ThresholdGrid::default_comparison(),
        );

        let p_threshold = raw.p_threshold.unwrap_or(DEFAULT_P_THRESHOLD);
        if !(p_threshold > 0.0 && p_threshold < 1.0) {
            v.push(format!("p_threshold: {p_threshold} is outside (0, 1)"));
        }

        let analysis_ids: BTreeSet<&str> = model_ids
            .iter()
            .copied()
            .filter(|m| !grouped.contains(m))
            .chain(raw.instance_groups.iter().map(|g| g.id.as_str()))
            .collect();
        for (name, members) in &raw.groups {
            if members.is_empty() {
                v.push(format!("groups.{name}: no members"));
            }
            for m in members {
                if !analysis_ids.contains(m.as_str()) {
                    v.push(format!(
                        "groups.{name}: `{m}` is neither an ungrouped model nor an instance group"
                    ));
                }
            }
        }
        for c in &raw.comparisons {
            for g in [&c.group_a, &c.group_b] {
                if !raw.groups.contains_key(g) {
                    v.push(format!("comparisons: unknown group `{g}`"));
                }
            }
            if let Some(layer) = &c.layer {
                if !layer_order.contains(layer) {
                    v.push(format!("comparisons: unknown layer `{layer}`"));
                }
            }
        }

        if !v.is_empty() {
            return Err(ManifestError::Invalid {
                path: path.to_path_buf(),
                violations: v,
            });
        }
        Ok(AuditManifest {
            path: path.to_path_buf(),
            models,
            layer_order,
            tests,
            permutation,
            replicates,
            instance_groups: raw.instance_groups,
            threshold_grid,
            comparison_grid,
            p_threshold,
            groups: raw.groups,
            comparisons: raw.comparisons,
        })
    }

    /// Path of one concept file for a (model, layer).
    pub fn concept_path(
        &self,
        model: &ModelSpec,
        layer: &str,
        concept: &ConceptRef,
    ) -> Option<PathBuf> {
        model.layers.get(layer).map(|dir| dir.join(&concept.file))
    }

    /// Every (model index, layer, test index) with embeddings, in manifest order.
    pub fn work_items(&self) -> Vec<(usize, &str, usize)> {
        let mut items = Vec::new();
        for (mi, m) in self.models.iter().enumerate() {
            for layer in &self.layer_order {
                if m.layers.contains_key(layer) {
                    for ti in 0..self.tests.len() {
                        items.push((mi, layer.as_str(), ti));
                    }
                }
            }
        }
        items
    }

    /// Loads the four concept sets of one work item.
    pub fn load_test(
        &self,
        model: &ModelSpec,
        layer: &str,
        test: &TestSpec,
    ) -> Result<AssociationTest, LoadError> {
        let mut sets = Vec::with_capacity(4);
        for (concept, role) in test.concepts() {
            let path = self.concept_path(model, layer, concept).ok_or_else(|| {
                LoadError::MissingLayer {
                    model: model.id.clone(),
                    layer: layer.to_string(),
                }
            })?;
            sets.push(read_embeddings(&path, &concept.name, role)?);
        }
        let [x, y, a, b]: [_; 4] = sets.try_into().expect("four concept sets");
        Ok(AssociationTest::new(&test.name, x, y, a, b)
            .map_err(|source| LoadError::Test {
                test: test.name.clone(),
                source,
            })?
            .with_tags(test.tags.clone()))
    }

    /// Reads every referenced embedding file once and checks that the four
    /// sets of each test agree on dimension. Returns all violations found.
    pub fn check_files(&self) -> Vec<String> {
        let mut dims: HashMap<PathBuf, Option<usize>> = HashMap::new();
        let mut v = Vec::new();
        for (mi, layer, ti) in self.work_items() {
            let model = &self.models[mi];
            let test = &self.tests[ti];
            let mut seen = Vec::with_capacity(4);
            for (concept, _) in test.concepts() {
                let path = self
                    .concept_path(model, layer, concept)
                    .expect("work items only cover declared layers");
                let dim = dims.entry(path.clone()).or_insert_with(|| {
                    match read_rows(&path).and_then(|rows| {
                        crate::ConceptSet::from_rows(&concept.name, Role::Target, rows).map_err(
                            |source| EmbeddingFileError::Invalid {
                                path: path.clone(),
                                source,
                            },
                        )
                    }) {
                        Ok(set) => Some(set.dim()),
                        Err(e) => {
                            v.push(e.to_string());
                            None
                        }
                    }
                });
                if let Some(d) = dim {
                    seen.push((path, *d));
                }
            }
            if seen.iter().any(|(_, d)| *d != seen[0].1) {
                let detail: Vec<String> = seen
                    .iter()
                    .map(|(p, d)| format!("{}={d}", p.display()))
                    .collect();
                v.push(format!(
                    "{}/{layer}/{}: concept dimensions disagree ({})",
                    model.id,
                    test.name,
                    detail.join(", ")
                ));
            }
        }
        v
    }

    /// Model ids seen by the analytics: ungrouped models plus instance-group ids.
    pub fn analysis_ids(&self) -> Vec<String> {
        let grouped: BTreeSet<&String> = self
            .instance_groups
            .iter()
            .flat_map(|g| &g.members)
            .collect();
        self.models
            .iter()
            .map(|m| &m.id)
            .filter(|id| !grouped.contains(id))
            .cloned()
            .chain(self.instance_groups.iter().map(|g| g.id.clone()))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    File(#[from] EmbeddingFileError),

    #[error("model `{model}` has no layer `{layer}`")]
    MissingLayer { model: String, layer: String },

    #[error("test `{test}`: {source}")]
    Test {
        test: String,
        source: crate::error::StatsError,
    },
}
