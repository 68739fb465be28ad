//! Permutation test on the bias counts of two groups of models.
//!
//! For every threshold the original difference of total detections
//! (group A minus group B) is compared against every balanced reassignment
//! of the models to the two groups. The per-threshold probability that a
//! reassignment has a strictly larger difference is averaged over the grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, DetectionMatrix, ThresholdGrid};
use crate::stats::{binomial, mean, Combinations, SamplingMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTestConfig {
    /// Enumerate every reassignment when there are at most this many.
    pub max_exact: u64,
    /// Reassignments drawn when enumeration is too large.
    pub monte_carlo_draws: u64,
    pub seed: u64,
}

impl Default for GroupTestConfig {
    fn default() -> Self {
        GroupTestConfig {
            max_exact: 1_000_000,
            monte_carlo_draws: 10_000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparisonOutcome {
    pub grid: Vec<f64>,
    /// Total detections of group A minus group B, per threshold.
    pub delta_orig: Vec<i64>,
    /// Fraction of reassignments with a strictly larger difference, per threshold.
    pub exceedance: Vec<f64>,
    /// Fraction of reassignments with an equal difference, per threshold.
    pub ties: Vec<f64>,
    /// Mean of `exceedance` over the grid.
    pub p_value: f64,
    /// Mean of `ties` over the grid.
    pub tie_fraction: f64,
    pub n_group_permutations: u64,
    pub mode: SamplingMode,
}

/// Generates group-A index lists for every reassignment (or a seeded sample),
/// stored flat with a stride of `na`.
fn reassignments(n: usize, na: usize, cfg: &GroupTestConfig) -> (Vec<u32>, u64, SamplingMode) {
    let total = binomial(n as u64, na as u64);
    match total {
        Some(c) if c <= cfg.max_exact => {
            let mut flat = Vec::with_capacity(c as usize * na);
            let mut combos = Combinations::new(n, na);
            while let Some(s) = combos.next_subset() {
                flat.extend(s.iter().map(|&i| i as u32));
            }
            (flat, c, SamplingMode::Exact)
        }
        _ => {
            let base = ChaCha8Rng::seed_from_u64(cfg.seed);
            let flat: Vec<u32> = (0..cfg.monte_carlo_draws)
                .into_par_iter()
                .flat_map_iter(|k| {
                    let mut rng = base.clone();
                    rng.set_stream(k);
                    let mut idx: Vec<u32> = (0..n as u32).collect();
                    for i in 0..na {
                        let j = rng.random_range(i..n);
                        idx.swap(i, j);
                    }
                    idx.truncate(na);
                    idx
                })
                .collect();
            (flat, cfg.monte_carlo_draws, SamplingMode::MonteCarlo)
        }
    }
}

/// Compares the per-model bias-count curves of two groups.
///
/// `counts_a[i][j]` is the number of detections of the i-th model of group A
/// at `grid.values()[j]`.
pub fn compare_groups(
    counts_a: &[Vec<usize>],
    counts_b: &[Vec<usize>],
    grid: &ThresholdGrid,
    cfg: &GroupTestConfig,
) -> Result<GroupComparisonOutcome, AnalysisError> {
    if counts_a.is_empty() || counts_b.is_empty() {
        return Err(AnalysisError::InvalidGroups(
            "both groups must be non-empty".into(),
        ));
    }
    if let Some(c) = counts_a
        .iter()
        .chain(counts_b)
        .find(|c| c.len() != grid.len())
    {
        return Err(AnalysisError::InvalidGroups(format!(
            "count curve has {} points, grid has {}",
            c.len(),
            grid.len()
        )));
    }
    if cfg.max_exact == 0 && cfg.monte_carlo_draws == 0 {
        return Err(AnalysisError::InvalidGroups(
            "no reassignments to draw".into(),
        ));
    }
    let na = counts_a.len();
    let models: Vec<&Vec<usize>> = counts_a.iter().chain(counts_b).collect();
    let (splits, n_splits, mode) = reassignments(models.len(), na, cfg);
    if n_splits == 0 {
        return Err(AnalysisError::InvalidGroups(
            "monte_carlo_draws must be positive".into(),
        ));
    }

    let per_threshold: Vec<(i64, u64, u64)> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let column: Vec<i64> = models.iter().map(|c| c[j] as i64).collect();
            let total: i64 = column.iter().sum();
            let sum_a: i64 = column[..na].iter().sum();
            let delta_orig = 2 * sum_a - total;
            let (mut greater, mut equal) = (0u64, 0u64);
            for split in splits.chunks_exact(na) {
                let s: i64 = split.iter().map(|&i| column[i as usize]).sum();
                let delta = 2 * s - total;
                if delta_orig < delta {
                    greater += 1;
                } else if delta == delta_orig {
                    equal += 1;
                }
            }
            (delta_orig, greater, equal)
        })
        .collect();

    let denom = n_splits as f64;
    let exceedance: Vec<f64> = per_threshold.iter().map(|t| t.1 as f64 / denom).collect();
    let ties: Vec<f64> = per_threshold.iter().map(|t| t.2 as f64 / denom).collect();
    Ok(GroupComparisonOutcome {
        grid: grid.values().to_vec(),
        delta_orig: per_threshold.iter().map(|t| t.0).collect(),
        p_value: mean(exceedance.iter().copied()),
        tie_fraction: mean(ties.iter().copied()),
        exceedance,
        ties,
        n_group_permutations: n_splits,
        mode,
    })
}

/// Runs [`compare_groups`] on the count curves of two disjoint sets of
/// models taken from one layer of a detection matrix.
pub fn compare_model_groups(
    matrix: &DetectionMatrix,
    layer: &str,
    group_a: &[String],
    group_b: &[String],
    grid: &ThresholdGrid,
    cfg: &GroupTestConfig,
) -> Result<GroupComparisonOutcome, AnalysisError> {
    if let Some(m) = group_a.iter().find(|m| group_b.contains(m)) {
        return Err(AnalysisError::InvalidGroups(format!(
            "model `{m}` appears in both groups"
        )));
    }
    let curves = |group: &[String]| {
        group
            .iter()
            .map(|m| matrix.count_curve(m, layer, grid))
            .collect::<Result<Vec<_>, _>>()
    };
    compare_groups(&curves(group_a)?, &curves(group_b)?, grid, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(grid: &ThresholdGrid, counts: &[usize]) -> Vec<Vec<usize>> {
        counts.iter().map(|&c| vec![c; grid.len()]).collect()
    }

    #[test]
    fn full_separation_gives_zero() {
        let grid = ThresholdGrid::new(vec![0.01, 0.05]).unwrap();
        let out = compare_groups(
            &flat(&grid, &[5; 5]),
            &flat(&grid, &[0; 5]),
            &grid,
            &GroupTestConfig::default(),
        )
        .unwrap();
        assert_eq!(out.n_group_permutations, 252);
        assert_eq!(out.mode, SamplingMode::Exact);
        assert_eq!(out.delta_orig, vec![25, 25]);
        assert_eq!(out.p_value, 0.0);
        assert_eq!(out.ties, vec![1.0 / 252.0; 2]);
    }

    #[test]
    fn all_equal_counts_tie_everywhere() {
        let grid = ThresholdGrid::new(vec![0.01]).unwrap();
        let out = compare_groups(
            &flat(&grid, &[3; 5]),
            &flat(&grid, &[3; 5]),
            &grid,
            &GroupTestConfig::default(),
        )
        .unwrap();
        assert_eq!(out.delta_orig, vec![0]);
        assert_eq!(out.tie_fraction, 1.0);
        assert_eq!(out.p_value, 0.0);
    }

    #[test]
    fn rejects_empty_or_misaligned_groups() {
        let grid = ThresholdGrid::new(vec![0.01, 0.02]).unwrap();
        let cfg = GroupTestConfig::default();
        assert!(compare_groups(&[], &flat(&grid, &[1]), &grid, &cfg).is_err());
        assert!(compare_groups(&[vec![1]], &flat(&grid, &[1]), &grid, &cfg).is_err());
    }

    #[test]
    fn monte_carlo_fallback_is_seeded() {
        let grid = ThresholdGrid::new(vec![0.01]).unwrap();
        let cfg = GroupTestConfig {
            max_exact: 100,
            monte_carlo_draws: 4000,
            seed: 3,
        };
        let a = flat(&grid, &[4, 6, 2, 8, 1]);
        let b = flat(&grid, &[3, 5, 0, 2, 1]);
        let first = compare_groups(&a, &b, &grid, &cfg).unwrap();
        assert_eq!(first.mode, SamplingMode::MonteCarlo);
        assert_eq!(first.n_group_permutations, 4000);
        assert_eq!(first, compare_groups(&a, &b, &grid, &cfg).unwrap());

        let exact = compare_groups(&a, &b, &grid, &GroupTestConfig::default()).unwrap();
        assert!((first.p_value - exact.p_value).abs() < 0.03);
    }

    #[test]
    fn model_groups_must_be_disjoint() {
        let m = DetectionMatrix::new(vec!["gap".into()]);
        let grid = ThresholdGrid::new(vec![0.01]).unwrap();
        let err = compare_model_groups(
            &m,
            "gap",
            &["a".into()],
            &["a".into()],
            &grid,
            &GroupTestConfig::default(),
        );
        assert!(matches!(err, Err(AnalysisError::InvalidGroups(_))));
    }
}
