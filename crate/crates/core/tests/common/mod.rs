//! Shared generators and brute-force oracles for the integration tests.
//!
//! The oracles deliberately avoid the crate's permutation machinery: they
//! enumerate label assignments with bitmasks and recompute the statistic
//! from the concept sets for every assignment.

#![allow(dead_code)]

use embias::analysis::{DetectionMatrix, EntryKey};
use embias::stats::{
    association_score, differential_association, ReplicateOutcome, SamplingMode, TestOutcome,
};
use embias::{AssociationTest, ConceptSet, Embedding, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..count)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

pub fn around(rng: &mut ChaCha8Rng, center: &[f64], count: usize, sigma: f64) -> Vec<Vec<f32>> {
    (0..count)
        .map(|_| {
            center
                .iter()
                .map(|c| {
                    let e: f64 = StandardNormal.sample(rng);
                    (c + sigma * e) as f32
                })
                .collect()
        })
        .collect()
}

pub fn set(name: &str, role: Role, rows: Vec<Vec<f32>>) -> ConceptSet {
    ConceptSet::from_rows(name, role, rows).unwrap()
}

pub fn test_from_rows(
    x: Vec<Vec<f32>>,
    y: Vec<Vec<f32>>,
    a: Vec<Vec<f32>>,
    b: Vec<Vec<f32>>,
) -> AssociationTest {
    AssociationTest::new(
        "t",
        set("x", Role::Target, x),
        set("y", Role::Target, y),
        set("a", Role::Attribute, a),
        set("b", Role::Attribute, b),
    )
    .unwrap()
}

/// Gaussian test with the given set sizes and dimension.
pub fn gaussian_test(rng: &mut ChaCha8Rng, sizes: [usize; 4], dim: usize) -> AssociationTest {
    let [nx, ny, na, nb] = sizes;
    test_from_rows(
        gaussian_rows(rng, nx, dim),
        gaussian_rows(rng, ny, dim),
        gaussian_rows(rng, na, dim),
        gaussian_rows(rng, nb, dim),
    )
}

/// Random small test: |X|, |Y|, |A|, |B| in 1..=6, dim in 1..=8.
pub fn small_random_test(rng: &mut ChaCha8Rng) -> AssociationTest {
    let sizes = std::array::from_fn(|_| rng.random_range(1..=6));
    let dim = rng.random_range(1..=8);
    gaussian_test(rng, sizes, dim)
}

/// Integer-valued vectors: scaling by a dyadic factor stays exact in f32.
pub fn integer_rows(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..count)
        .map(|_| loop {
            let row: Vec<f32> = (0..dim)
                .map(|_| rng.random_range(-8i32..=8) as f32)
                .collect();
            if row.iter().any(|v| *v != 0.0) {
                break row;
            }
        })
        .collect()
}

fn pick(v: &[Embedding], mask: u64, inside: bool) -> Vec<Embedding> {
    v.iter()
        .enumerate()
        .filter(|(i, _)| ((mask >> i) & 1 == 1) == inside)
        .map(|(_, e)| e.clone())
        .collect()
}

/// Exact permutation p-value by direct enumeration of every relabelling,
/// recomputing the differential association from the concept sets each time.
pub fn brute_force_p(test: &AssociationTest) -> (f64, u64) {
    let pooled: Vec<Embedding> = test.x().iter().chain(test.y().iter()).cloned().collect();
    let n = pooled.len();
    assert!(n <= 20);
    let nx = test.x().len();
    let s_obs = differential_association(test.x(), test.y(), test.a(), test.b()).unwrap();
    let (mut ge, mut total) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        if mask.count_ones() as usize != nx {
            continue;
        }
        let x = ConceptSet::new("px", Role::Target, pick(&pooled, mask, true)).unwrap();
        let y = ConceptSet::new("py", Role::Target, pick(&pooled, mask, false)).unwrap();
        let stat = differential_association(&x, &y, test.a(), test.b()).unwrap();
        total += 1;
        if stat >= s_obs {
            ge += 1;
        }
    }
    (ge as f64 / total as f64, total)
}

/// Effect size with a plain two-pass sample standard deviation.
pub fn oracle_effect_size(test: &AssociationTest) -> f64 {
    let score = |e: &Embedding| association_score(e, test.a(), test.b()).unwrap();
    let xs: Vec<f64> = test.x().iter().map(score).collect();
    let ys: Vec<f64> = test.y().iter().map(score).collect();
    let all: Vec<f64> = xs.iter().chain(&ys).copied().collect();
    if all.iter().all(|s| *s == all[0]) {
        return 0.0;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let m = mean(&all);
    let sd = (all.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (all.len() - 1) as f64).sqrt();
    (mean(&xs) - mean(&ys)) / sd
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Relative comparison with an absolute floor at double rounding level,
/// for quantities that can cancel to (near) zero.
pub fn rel_close_floor(a: f64, b: f64, rel: f64) -> bool {
    rel_close(a, b, rel) || (a - b).abs() <= 1e-14
}

pub fn outcome(p: f64, d: f64) -> ReplicateOutcome {
    ReplicateOutcome::from_outcomes(vec![TestOutcome {
        s_obs: d,
        p,
        d,
        n_permutations: 10_000,
        mode_used: SamplingMode::MonteCarlo,
        tie_count: 0,
    }])
}

/// Random detection matrix: some p-values land exactly on common thresholds.
pub fn random_matrix(rng: &mut ChaCha8Rng) -> DetectionMatrix {
    let layers: Vec<String> = (0..rng.random_range(1..=4))
        .map(|l| format!("layer{l}"))
        .collect();
    let mut m = DetectionMatrix::new(layers.clone());
    let specials = [1e-4, 1e-3, 1e-2, 0.05, 0.1];
    for model in 0..rng.random_range(1..=6) {
        for layer in &layers {
            for t in 0..rng.random_range(0..=40) {
                let p = match rng.random_range(0..4) {
                    0 => specials[rng.random_range(0..specials.len())],
                    1 => 10f64.powf(rng.random_range(-5.0..0.0)),
                    _ => rng.random_range(0.0..1.0),
                };
                let d = rng.random_range(-1.0..2.0);
                m.insert(
                    EntryKey::new(format!("m{model}"), layer.clone(), format!("t{t}")),
                    outcome(p, d),
                )
                .unwrap();
            }
        }
    }
    m
}

/// Synthetic detections for one model: `detected` tests with p < 0.01 and
/// the rest spread over (0.01, 1).
pub fn model_outcomes(
    rng: &mut ChaCha8Rng,
    tests: usize,
    detected: usize,
) -> Vec<ReplicateOutcome> {
    (0..tests)
        .map(|i| {
            if i < detected {
                outcome(
                    10f64.powf(rng.random_range(-5.0..-2.0)),
                    rng.random_range(0.8..1.8),
                )
            } else {
                outcome(rng.random_range(0.01..1.0), rng.random_range(-0.5..0.8))
            }
        })
        .collect()
}

pub fn matrix_from_models(
    layer: &str,
    models: &[(String, Vec<ReplicateOutcome>)],
) -> DetectionMatrix {
    let mut m = DetectionMatrix::new(vec![layer.to_string()]);
    for (id, outs) in models {
        for (t, o) in outs.iter().enumerate() {
            m.insert(EntryKey::new(id.clone(), layer, format!("t{t}")), o.clone())
                .unwrap();
        }
    }
    m
}

/// Group-comparison oracle: materialises every reassignment as a bitmask.
/// Returns per-threshold (delta_orig, P(delta_orig < delta_k), P(delta_k == delta_orig)).
pub fn brute_force_groups(a: &[Vec<usize>], b: &[Vec<usize>]) -> Vec<(i64, f64, f64)> {
    let all: Vec<&Vec<usize>> = a.iter().chain(b).collect();
    let n = all.len();
    let na = a.len();
    let masks: Vec<u32> = (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == na)
        .collect();
    (0..all[0].len())
        .map(|j| {
            let delta = |mask: u32| -> i64 {
                (0..n)
                    .map(|i| {
                        let c = all[i][j] as i64;
                        if (mask >> i) & 1 == 1 {
                            c
                        } else {
                            -c
                        }
                    })
                    .sum()
            };
            let orig = delta((1u32 << na) - 1);
            let greater = masks.iter().filter(|&&m| orig < delta(m)).count();
            let equal = masks.iter().filter(|&&m| orig == delta(m)).count();
            (
                orig,
                greater as f64 / masks.len() as f64,
                equal as f64 / masks.len() as f64,
            )
        })
        .collect()
}
