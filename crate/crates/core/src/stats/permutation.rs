use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::combin::{binomial, Combinations};
use super::{association_scores, effect_size_from_scores};
use crate::embedding::AssociationTest;
use crate::error::StatsError;

/// How partitions of the pooled targets are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    /// Exact when the number of partitions fits in `max_permutations`.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

/// The regime a test actually ran in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Exact,
    MonteCarlo,
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMode::Exact => "exact",
            SamplingMode::MonteCarlo => "monte_carlo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub max_permutations: u64,
    pub seed: u64,
    pub mode: PermutationMode,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            max_permutations: 10_000,
            seed: 42,
            mode: PermutationMode::Auto,
        }
    }
}

impl PermutationConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        PermutationConfig { seed, ..self }
    }

    pub fn with_mode(self, mode: PermutationMode) -> Self {
        PermutationConfig { mode, ..self }
    }

    /// Picks the sampling regime for a pool of `n` targets of which `nx` are X.
    pub fn resolve(&self, n: usize, nx: usize) -> Result<SamplingMode, StatsError> {
        if self.max_permutations == 0 {
            return Err(StatsError::InvalidConfig(
                "max_permutations must be positive".into(),
            ));
        }
        let partitions = binomial(n as u64, nx as u64);
        let fits = partitions.is_some_and(|c| c <= self.max_permutations);
        match self.mode {
            PermutationMode::Auto if fits => Ok(SamplingMode::Exact),
            PermutationMode::Auto => Ok(SamplingMode::MonteCarlo),
            PermutationMode::Exact if fits => Ok(SamplingMode::Exact),
            PermutationMode::Exact => Err(StatsError::ExactTooLarge {
                partitions: partitions.map_or_else(|| "more than 2^64".into(), |c| c.to_string()),
                max: self.max_permutations,
            }),
            PermutationMode::MonteCarlo => Ok(SamplingMode::MonteCarlo),
        }
    }
}

/// Result of one permutation test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// Differential association of the original labelling.
    pub s_obs: f64,
    /// Fraction of partitions whose statistic is `>= s_obs`.
    pub p: f64,
    /// Effect size.
    pub d: f64,
    pub n_permutations: u64,
    pub mode_used: SamplingMode,
    /// Partitions whose statistic equals `s_obs` exactly.
    pub tie_count: u64,
}

/// Differential association of one split of the pooled scores.
///
/// Both sums run in index order so the same split always yields the same bits.
fn split_statistic(scores: &[f64], in_x: &[bool]) -> f64 {
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (s, &x) in scores.iter().zip(in_x) {
        if x {
            sx += s;
        } else {
            sy += s;
        }
    }
    sx - sy
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    ge: u64,
    eq: u64,
}

impl Tally {
    fn record(&mut self, stat: f64, s_obs: f64) {
        if stat >= s_obs {
            self.ge += 1;
            if stat == s_obs {
                self.eq += 1;
            }
        }
    }

    fn merge(self, other: Tally) -> Tally {
        Tally {
            ge: self.ge + other.ge,
            eq: self.eq + other.eq,
        }
    }
}

fn enumerate_exact(scores: &[f64], nx: usize, s_obs: f64) -> (Tally, u64) {
    let mut in_x = vec![false; scores.len()];
    let mut combos = Combinations::new(scores.len(), nx);
    let mut tally = Tally::default();
    let mut total = 0u64;
    while let Some(subset) = combos.next_subset() {
        in_x.fill(false);
        for &i in subset {
            in_x[i] = true;
        }
        tally.record(split_statistic(scores, &in_x), s_obs);
        total += 1;
    }
    (tally, total)
}

/// Draws `draws` uniform random splits. Split `k` is generated from stream `k`
/// of a ChaCha generator keyed by `seed`, so the tally does not depend on how
/// the work is scheduled.
fn sample_monte_carlo(scores: &[f64], nx: usize, s_obs: f64, draws: u64, seed: u64) -> Tally {
    let n = scores.len();
    let base = ChaCha8Rng::seed_from_u64(seed);
    (0..draws as usize)
        .into_par_iter()
        .with_min_len(512)
        .fold(
            || {
                (
                    Tally::default(),
                    (0..n).collect::<Vec<usize>>(),
                    vec![false; n],
                )
            },
            |(mut tally, mut idx, mut in_x), k| {
                let mut rng = base.clone();
                rng.set_stream(k as u64);
                for (i, v) in idx.iter_mut().enumerate() {
                    *v = i;
                }
                // Partial Fisher-Yates: the first nx slots become X.
                for i in 0..nx {
                    let j = rng.random_range(i..n);
                    idx.swap(i, j);
                }
                in_x.fill(false);
                for &i in &idx[..nx] {
                    in_x[i] = true;
                }
                tally.record(split_statistic(scores, &in_x), s_obs);
                (tally, idx, in_x)
            },
        )
        .map(|(t, _, _)| t)
        .reduce(Tally::default, Tally::merge)
}

/// Runs the one-sided permutation test on the target labels of `test`.
///
/// Scores of every pooled target are computed once; each partition then only
/// re-sums the cached scores.
pub fn permutation_test(
    test: &AssociationTest,
    cfg: &PermutationConfig,
) -> Result<TestOutcome, StatsError> {
    let (x, y) = (test.x(), test.y());
    let nx = x.len();
    let n = nx + y.len();
    if x.is_empty() || y.is_empty() || n < 2 {
        return Err(StatsError::TooFewTargets(n));
    }
    let mode = cfg.resolve(n, nx)?;
    let scores = association_scores(x.iter().chain(y.iter()), test.a(), test.b())?;

    let identity: Vec<bool> = (0..n).map(|i| i < nx).collect();
    let s_obs = split_statistic(&scores, &identity);
    let d = effect_size_from_scores(&scores[..nx], &scores[nx..])?;

    let (tally, n_permutations) = match mode {
        SamplingMode::Exact => enumerate_exact(&scores, nx, s_obs),
        SamplingMode::MonteCarlo => (
            sample_monte_carlo(&scores, nx, s_obs, cfg.max_permutations, cfg.seed),
            cfg.max_permutations,
        ),
    };

    Ok(TestOutcome {
        s_obs,
        p: tally.ge as f64 / n_permutations as f64,
        d,
        n_permutations,
        mode_used: mode,
        tie_count: tally.eq,
    })
}
