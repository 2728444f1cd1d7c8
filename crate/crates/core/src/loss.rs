//! Losses on raw scores and their negative gradients.
//!
//! Scores are laid out sample-major: `scores[v * n_outputs + q]`. Regression
//! uses one output and `0.5 * (y - F)^2`; classification uses one score per
//! class and softmax cross-entropy.

use crate::data::ProblemKind;

/// Numerically stable softmax of one score row, written into `out`.
pub fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; scores.len()];
    softmax_into(scores, &mut out);
    out
}

/// Loss of one sample.
pub fn sample_loss(kind: ProblemKind, target: f64, scores: &[f64]) -> f64 {
    match kind {
        ProblemKind::Regression => {
            let r = target - scores[0];
            0.5 * r * r
        }
        ProblemKind::Classification => {
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_norm = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
            log_norm - scores[target as usize]
        }
    }
}

/// Mean loss over all samples.
pub fn mean_loss(kind: ProblemKind, targets: &[f64], scores: &[f64], n_outputs: usize) -> f64 {
    let total: f64 = targets
        .iter()
        .zip(scores.chunks_exact(n_outputs))
        .map(|(&y, s)| sample_loss(kind, y, s))
        .sum();
    total / targets.len() as f64
}

/// Negative gradient of [`sample_loss`] with respect to each score.
pub fn negative_gradient_into(kind: ProblemKind, target: f64, scores: &[f64], out: &mut [f64]) {
    match kind {
        ProblemKind::Regression => out[0] = target - scores[0],
        ProblemKind::Classification => {
            softmax_into(scores, out);
            let y = target as usize;
            for (q, o) in out.iter_mut().enumerate() {
                *o = if q == y { 1.0 - *o } else { -*o };
            }
        }
    }
}

/// Negative gradients for every sample, same layout as `scores`.
pub fn negative_gradients(kind: ProblemKind, targets: &[f64], scores: &[f64], n_outputs: usize) -> Vec<f64> {
    let mut out = vec![0.0; scores.len()];
    for ((&y, s), o) in targets
        .iter()
        .zip(scores.chunks_exact(n_outputs))
        .zip(out.chunks_exact_mut(n_outputs))
    {
        negative_gradient_into(kind, y, s, o);
    }
    out
}
