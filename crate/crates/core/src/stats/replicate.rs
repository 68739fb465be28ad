use serde::{Deserialize, Serialize};

use super::permutation::{permutation_test, PermutationConfig, TestOutcome};
use super::seed::replicate_seed;
use crate::embedding::AssociationTest;
use crate::error::StatsError;

/// Running arithmetic mean. A sequence of identical values averages to that
/// value exactly.
pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut m = 0.0;
    let mut k = 0.0;
    for v in values {
        k += 1.0;
        m += (v - m) / k;
    }
    m
}

/// Replicated permutation tests with their averaged p- and d-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub mean_p: f64,
    pub mean_d: f64,
    pub per_replicate: Vec<TestOutcome>,
    pub n_replicates: usize,
}

impl ReplicateOutcome {
    /// Aggregates a non-empty list of outcomes.
    pub fn from_outcomes(per_replicate: Vec<TestOutcome>) -> Self {
        assert!(!per_replicate.is_empty(), "no outcomes to aggregate");
        ReplicateOutcome {
            mean_p: mean(per_replicate.iter().map(|o| o.p)),
            mean_d: mean(per_replicate.iter().map(|o| o.d)),
            n_replicates: per_replicate.len(),
            per_replicate,
        }
    }

    /// Pools the replicates of several instances (e.g. random initialisations
    /// of one architecture) into one outcome.
    pub fn pool<'a>(instances: impl IntoIterator<Item = &'a ReplicateOutcome>) -> Option<Self> {
        let all: Vec<TestOutcome> = instances
            .into_iter()
            .flat_map(|o| o.per_replicate.iter().cloned())
            .collect();
        (!all.is_empty()).then(|| ReplicateOutcome::from_outcomes(all))
    }

    pub fn mean_s_obs(&self) -> f64 {
        mean(self.per_replicate.iter().map(|o| o.s_obs))
    }

    pub fn total_ties(&self) -> u64 {
        self.per_replicate.iter().map(|o| o.tie_count).sum()
    }
}

/// Runs `n_replicates` permutation tests with seeds derived from the master
/// seed, the replicate index and the test name.
pub fn run_replicates(
    test: &AssociationTest,
    cfg: &PermutationConfig,
    n_replicates: usize,
) -> Result<ReplicateOutcome, StatsError> {
    if n_replicates == 0 {
        return Err(StatsError::InvalidConfig(
            "n_replicates must be positive".into(),
        ));
    }
    let outcomes = (0..n_replicates)
        .map(|i| {
            let seed = replicate_seed(cfg.seed, i as u64, test.name());
            permutation_test(test, &cfg.with_seed(seed))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReplicateOutcome::from_outcomes(outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{ConceptSet, Role};
    use crate::stats::{PermutationMode, SamplingMode};

    fn two_by_two() -> AssociationTest {
        let s = |n: &str, r, rows: &[[f32; 3]]| {
            ConceptSet::from_rows(n, r, rows.iter().map(|v| v.to_vec())).unwrap()
        };
        AssociationTest::new(
            "two-by-two",
            s("x", Role::Target, &[[1.0, 0.2, 0.0], [0.8, 0.1, 0.3]]),
            s("y", Role::Target, &[[0.1, 1.0, 0.2], [0.3, 0.9, -0.1]]),
            s("a", Role::Attribute, &[[1.0, 0.0, 0.1], [0.9, 0.2, 0.0]]),
            s("b", Role::Attribute, &[[0.0, 1.0, 0.0]]),
        )
        .unwrap()
    }

    #[test]
    fn mean_of_identical_values_is_exact() {
        assert_eq!(mean([0.1, 0.1, 0.1]), 0.1);
        assert_eq!(mean([1.0, 2.0, 3.0, 4.0]), 2.5);
        assert_eq!(mean(std::iter::empty()), 0.0);
    }

    #[test]
    fn exact_replicates_are_identical() {
        let out = run_replicates(&two_by_two(), &PermutationConfig::default(), 3).unwrap();
        assert_eq!(out.n_replicates, 3);
        for r in &out.per_replicate {
            assert_eq!(r.mode_used, SamplingMode::Exact);
            assert_eq!(r.p, out.mean_p);
            assert_eq!(r.d, out.mean_d);
        }
        assert_eq!(out.per_replicate[0].n_permutations, 6);
    }

    #[test]
    fn monte_carlo_replicates_are_reproducible_and_distinct() {
        let cfg = PermutationConfig {
            max_permutations: 3000,
            seed: 99,
            mode: PermutationMode::MonteCarlo,
        };
        let first = run_replicates(&two_by_two(), &cfg, 3).unwrap();
        let second = run_replicates(&two_by_two(), &cfg, 3).unwrap();
        assert_eq!(first, second);
        let ps: Vec<f64> = first.per_replicate.iter().map(|o| o.p).collect();
        assert!(
            ps[0] != ps[1] || ps[1] != ps[2],
            "replicates share a stream: {ps:?}"
        );
    }

    #[test]
    fn zero_replicates_rejected() {
        assert!(run_replicates(&two_by_two(), &PermutationConfig::default(), 0).is_err());
    }

    #[test]
    fn pooling_instances_averages_all_replicates() {
        let t = |p, d| TestOutcome {
            s_obs: 1.0,
            p,
            d,
            n_permutations: 10,
            mode_used: SamplingMode::Exact,
            tie_count: 1,
        };
        let a = ReplicateOutcome::from_outcomes(vec![t(0.1, 1.0), t(0.3, 2.0)]);
        let b = ReplicateOutcome::from_outcomes(vec![t(0.2, 0.0), t(0.2, 1.0)]);
        let pooled = ReplicateOutcome::pool([&a, &b]).unwrap();
        assert_eq!(pooled.n_replicates, 4);
        assert!((pooled.mean_p - 0.2).abs() < 1e-15);
        assert!((pooled.mean_d - 1.0).abs() < 1e-15);
        assert_eq!(pooled.total_ties(), 4);
        assert!(ReplicateOutcome::pool([]).is_none());
    }
}
