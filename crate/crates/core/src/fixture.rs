//! Synthetic audit fixtures.
//!
//! Writes EMB1 files and a manifest for a set of models whose target sets
//! are pulled towards the attribute centroids with a per-model strength.
//! Strength 0 gives embeddings with no planted association.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use crate::embedding::{ConceptSet, Role};
use crate::io::emb::write_embeddings;
use crate::stats::{derive_seed, name_hash};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureModel {
    pub id: String,
    /// How far X (Y) is pulled from the attribute midpoint towards A (B); 0..=1.
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub models: Vec<FixtureModel>,
    /// (layer id, dimension) in network order.
    pub layers: Vec<(String, usize)>,
    pub tests: usize,
    /// Inclusive range of vectors per concept set.
    pub set_size: (usize, usize),
    pub seed: u64,
    pub replicates: usize,
    pub max_permutations: u64,
    /// Instance groups written into the manifest: (group id, member ids).
    pub instance_groups: Vec<(String, Vec<String>)>,
    /// Comparison groups written into the manifest: (group id, member ids).
    pub groups: Vec<(String, Vec<String>)>,
}

impl FixtureSpec {
    /// Thirteen models over six layers: five strongly biased, five weakly
    /// biased, three unbiased instances pooled into one `random` model.
    pub fn standard() -> Self {
        let strong = ["npid", "simclr", "moco_v1", "moco_v2", "byol"];
        let weak = ["jigsaw", "rotation", "odc", "relative_loc", "clusterfit"];
        let random = ["random_1", "random_2", "random_3"];
        let mut models = Vec::new();
        for (i, id) in strong.iter().enumerate() {
            models.push(FixtureModel {
                id: id.to_string(),
                strength: 0.35 + 0.05 * i as f64,
            });
        }
        for (i, id) in weak.iter().enumerate() {
            models.push(FixtureModel {
                id: id.to_string(),
                strength: 0.02 * i as f64,
            });
        }
        for id in random {
            models.push(FixtureModel {
                id: id.to_string(),
                strength: 0.0,
            });
        }
        let names = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        FixtureSpec {
            models,
            layers: [
                ("maxpool", 64),
                ("block2", 128),
                ("block3", 256),
                ("block4", 512),
                ("block5", 1024),
                ("gap", 2048),
            ]
            .iter()
            .map(|(l, d)| (l.to_string(), *d))
            .collect(),
            tests: 8,
            set_size: (4, 12),
            seed: 2024,
            replicates: 3,
            max_permutations: 10_000,
            instance_groups: vec![("random".into(), names(&random))],
            groups: vec![
                ("contrastive".into(), names(&strong)),
                ("non_contrastive".into(), names(&weak)),
            ],
        }
    }

    /// A small fixture for quick end-to-end checks.
    pub fn small() -> Self {
        let mut spec = Self::standard();
        spec.models.retain(|m| {
            ["simclr", "byol", "rotation", "odc", "random_1", "random_2"].contains(&m.id.as_str())
        });
        spec.layers = vec![("block2".into(), 16), ("gap".into(), 32)];
        spec.tests = 3;
        spec.set_size = (3, 8);
        spec.max_permutations = 2_000;
        spec.instance_groups = vec![("random".into(), vec!["random_1".into(), "random_2".into()])];
        spec.groups = vec![
            ("contrastive".into(), vec!["simclr".into(), "byol".into()]),
            (
                "non_contrastive".into(),
                vec!["rotation".into(), "odc".into()],
            ),
        ];
        spec
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn cloud(rng: &mut ChaCha8Rng, center: &[f64], count: usize, noise: f64) -> Vec<Vec<f32>> {
    (0..count)
        .map(|_| {
            center
                .iter()
                .map(|c| {
                    let e: f64 = StandardNormal.sample(rng);
                    (c + noise * e) as f32
                })
                .collect()
        })
        .collect()
}

fn io_err(e: impl std::fmt::Display) -> io::Error {
    io::Error::other(e.to_string())
}

/// Writes the fixture under `dir` and returns the manifest path.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> io::Result<PathBuf> {
    let mut size_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sizes: Vec<[usize; 4]> = (0..spec.tests)
        .map(|_| std::array::from_fn(|_| size_rng.random_range(spec.set_size.0..=spec.set_size.1)))
        .collect();

    for model in &spec.models {
        for (layer, dim) in &spec.layers {
            let layer_dir = dir.join(&model.id).join(layer);
            fs::create_dir_all(&layer_dir)?;
            for (t, size) in sizes.iter().enumerate() {
                let seed = derive_seed(
                    derive_seed(spec.seed, name_hash(&model.id)),
                    name_hash(&format!("{layer}/{t}")),
                );
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mu_a = gaussian(&mut rng, *dim);
                let mu_b = gaussian(&mut rng, *dim);
                let mid: Vec<f64> = mu_a.iter().zip(&mu_b).map(|(a, b)| 0.5 * (a + b)).collect();
                let toward = |target: &[f64]| -> Vec<f64> {
                    mid.iter()
                        .zip(target)
                        .map(|(m, t)| m + model.strength * (t - m))
                        .collect()
                };
                let centers = [toward(&mu_a), toward(&mu_b), mu_a.clone(), mu_b.clone()];
                for (k, (center, count)) in centers.iter().zip(size).enumerate() {
                    let rows = cloud(&mut rng, center, *count, 1.0);
                    let role = if k < 2 { Role::Target } else { Role::Attribute };
                    let set = ConceptSet::from_rows("s", role, rows).map_err(io_err)?;
                    let file = layer_dir.join(format!("t{t}_{}.emb", ["x", "y", "a", "b"][k]));
                    write_embeddings(&set, &file).map_err(io_err)?;
                }
            }
        }
    }

    let concept =
        |t: usize, k: &str| json!({"name": format!("t{t}_{k}"), "file": format!("t{t}_{k}.emb")});
    let manifest = json!({
        "models": spec.models.iter().map(|m| json!({
            "id": m.id,
            "layers": spec.layers.iter()
                .map(|(l, _)| (l.clone(), json!(format!("{}/{}", m.id, l))))
                .collect::<serde_json::Map<_, _>>(),
        })).collect::<Vec<_>>(),
        "layer_order": spec.layers.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>(),
        "tests": (0..spec.tests).map(|t| json!({
            "name": format!("test_{t}"),
            "tags": if t % 2 == 0 { vec!["intersectional"] } else { vec![] },
            "x": concept(t, "x"), "y": concept(t, "y"),
            "a": concept(t, "a"), "b": concept(t, "b"),
        })).collect::<Vec<_>>(),
        "permutation": {"max_permutations": spec.max_permutations, "seed": 42, "mode": "auto"},
        "replicates": spec.replicates,
        "instance_groups": spec.instance_groups.iter()
            .map(|(id, members)| json!({"id": id, "members": members}))
            .collect::<Vec<_>>(),
        "groups": spec.groups.iter()
            .map(|(id, members)| (id.clone(), json!(members)))
            .collect::<serde_json::Map<_, _>>(),
        "comparisons": if spec.groups.len() >= 2 {
            vec![json!({"group_a": spec.groups[0].0, "group_b": spec.groups[1].0})]
        } else {
            vec![]
        },
    });
    let path = dir.join("manifest.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).map_err(io_err)?,
    )?;
    Ok(path)
}
