//! The association statistics: cosine similarity, per-item association
//! scores, the differential association of two target sets, the effect
//! size, and the permutation test built on top of them.

mod combin;
mod permutation;
mod replicate;
mod seed;

pub use combin::{binomial, Combinations};
pub use permutation::{
    permutation_test, PermutationConfig, PermutationMode, SamplingMode, TestOutcome,
};
pub use replicate::{mean, run_replicates, ReplicateOutcome};
pub use seed::{derive_seed, name_hash, replicate_seed};

use crate::embedding::{ConceptSet, Embedding};
use crate::error::StatsError;

/// Dot product of two `f32` slices accumulated in `f64`.
///
/// Four interleaved accumulators are combined in a fixed order so the
/// result is identical on every call.
pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut acc = [0.0f64; 4];
    let mut uc = u.chunks_exact(4);
    let mut vc = v.chunks_exact(4);
    for (a, b) in (&mut uc).zip(&mut vc) {
        acc[0] += a[0] as f64 * b[0] as f64;
        acc[1] += a[1] as f64 * b[1] as f64;
        acc[2] += a[2] as f64 * b[2] as f64;
        acc[3] += a[3] as f64 * b[3] as f64;
    }
    let mut tail = 0.0;
    for (a, b) in uc.remainder().iter().zip(vc.remainder()) {
        tail += *a as f64 * *b as f64;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn check_dims(left: usize, right: usize) -> Result<(), StatsError> {
    if left != right {
        return Err(StatsError::DimensionMismatch { left, right });
    }
    Ok(())
}

/// Cosine similarity of two embeddings.
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64, StatsError> {
    check_dims(u.dim(), v.dim())?;
    if u.norm() == 0.0 || v.norm() == 0.0 {
        return Err(StatsError::ZeroNorm);
    }
    Ok(dot(u.as_slice(), v.as_slice()) / (u.norm() * v.norm()))
}

fn mean_cosine(t: &Embedding, set: &ConceptSet) -> Result<f64, StatsError> {
    let mut sum = 0.0;
    for v in set {
        sum += cosine(t, v)?;
    }
    Ok(sum / set.len() as f64)
}

/// Mean cosine of `t` to the vectors of `a` minus its mean cosine to `b`.
pub fn association_score(t: &Embedding, a: &ConceptSet, b: &ConceptSet) -> Result<f64, StatsError> {
    check_dims(t.dim(), a.dim())?;
    check_dims(t.dim(), b.dim())?;
    Ok(mean_cosine(t, a)? - mean_cosine(t, b)?)
}

/// Association scores for a sequence of targets, one per target, in order.
pub fn association_scores<'a>(
    targets: impl IntoIterator<Item = &'a Embedding>,
    a: &ConceptSet,
    b: &ConceptSet,
) -> Result<Vec<f64>, StatsError> {
    targets
        .into_iter()
        .map(|t| association_score(t, a, b))
        .collect()
}

/// Sum of the scores of `x` minus the sum of the scores of `y`.
pub fn differential_association(
    x: &ConceptSet,
    y: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
) -> Result<f64, StatsError> {
    let mut sx = 0.0;
    for t in x {
        sx += association_score(t, a, b)?;
    }
    let mut sy = 0.0;
    for t in y {
        sy += association_score(t, a, b)?;
    }
    Ok(sx - sy)
}

/// Standardised gap between the mean X score and the mean Y score.
pub fn effect_size(
    x: &ConceptSet,
    y: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
) -> Result<f64, StatsError> {
    let xs = association_scores(x, a, b)?;
    let ys = association_scores(y, a, b)?;
    effect_size_from_scores(&xs, &ys)
}

/// Effect size from precomputed scores.
///
/// Uses the sample (n - 1) standard deviation over the pooled scores. When
/// every pooled score is identical the effect size is 0.
pub fn effect_size_from_scores(x_scores: &[f64], y_scores: &[f64]) -> Result<f64, StatsError> {
    let n = x_scores.len() + y_scores.len();
    if n < 2 || x_scores.is_empty() || y_scores.is_empty() {
        return Err(StatsError::TooFewTargets(n));
    }
    let pooled = || x_scores.iter().chain(y_scores);
    let first = x_scores[0];
    if pooled().all(|&s| s == first) {
        return Ok(0.0);
    }
    let mean_of = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let gap = mean_of(x_scores) - mean_of(y_scores);
    let pooled_mean = pooled().sum::<f64>() / n as f64;
    let var = pooled().map(|s| (s - pooled_mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(gap / var.sqrt())
}
