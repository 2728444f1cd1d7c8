//! Task geometry: cross-task error matrix `E`, similarities `S = 1 / (E + eps)`
//! and cosine distances between the similarity rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::BoostedModel;
use crate::data::{MultiTaskCollection, ProblemKind};
use crate::error::{Error, Result};
use crate::loss;
use crate::matrix::Matrix;

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Quantiles per output in a pseudo-residual signature.
pub const SIGNATURE_LEN: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilaritySource {
    #[default]
    CrossTaskError,
    PseudoResidual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGeometry {
    pub errors: Matrix,
    pub similarities: Matrix,
    pub distances: Matrix,
    pub epsilon: f64,
    pub source: SimilaritySource,
}

impl SimilarityGeometry {
    pub fn build(
        models: &[BoostedModel],
        collection: &MultiTaskCollection,
        epsilon: f64,
        source: SimilaritySource,
    ) -> Result<Self> {
        let errors = cross_task_errors(models, collection)?;
        let similarities = match source {
            SimilaritySource::CrossTaskError => to_similarity(&errors, epsilon)?,
            SimilaritySource::PseudoResidual => pseudo_residual_profiles(models, collection, epsilon)?,
        };
        let distances = cosine_distances(&similarities)?;
        Ok(Self {
            errors,
            similarities,
            distances,
            epsilon,
            source,
        })
    }
}

fn check_models(models: &[BoostedModel], collection: &MultiTaskCollection) -> Result<()> {
    if models.len() != collection.n_tasks() {
        return Err(Error::DimensionMismatch {
            expected: collection.n_tasks(),
            actual: models.len(),
        });
    }
    for m in models {
        if m.n_features != collection.n_features() {
            return Err(Error::DimensionMismatch {
                expected: collection.n_features(),
                actual: m.n_features,
            });
        }
        if m.kind != collection.kind() {
            return Err(Error::InvalidConfig("model and data problem kinds differ".into()));
        }
    }
    Ok(())
}

/// Error of a model's predictions on one task: mean squared error for
/// regression, misclassification rate for classification.
pub fn task_error(kind: ProblemKind, predictions: &[f64], targets: &[f64]) -> f64 {
    let n = targets.len() as f64;
    match kind {
        ProblemKind::Regression => predictions.iter().zip(targets).map(|(p, y)| (y - p) * (y - p)).sum::<f64>() / n,
        ProblemKind::Classification => {
            let correct = predictions.iter().zip(targets).filter(|(p, y)| p == y).count();
            1.0 - correct as f64 / n
        }
    }
}

/// `E[i][j]`: error of the model trained on task `j`, evaluated on task `i`'s data.
pub fn cross_task_errors(models: &[BoostedModel], collection: &MultiTaskCollection) -> Result<Matrix> {
    check_models(models, collection)?;
    let m = collection.n_tasks();
    let rows: Vec<Vec<f64>> = collection
        .tasks()
        .par_iter()
        .map(|task| {
            models
                .iter()
                .map(|model| {
                    let preds = model.predict_matrix(task.features())?;
                    Ok(task_error(task.kind(), &preds, task.targets()))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Matrix::from_rows(&rows, m)
}

/// Entrywise `1 / (E + eps)`.
pub fn to_similarity(errors: &Matrix, epsilon: f64) -> Result<Matrix> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon {epsilon} must be positive")));
    }
    if let Some(bad) = errors.as_slice().iter().find(|e| !e.is_finite() || **e < 0.0) {
        return Err(Error::InvalidData(format!("error entry {bad} is not a finite non-negative number")));
    }
    Ok(Matrix::from_fn(errors.rows(), errors.cols(), |i, j| 1.0 / (errors[(i, j)] + epsilon)))
}

/// Cosine distance between rows of `S`, with a forced zero diagonal,
/// symmetrized and clipped into `[0, 1]`.
pub fn cosine_distances(similarities: &Matrix) -> Result<Matrix> {
    if !similarities.is_square() {
        return Err(Error::InvalidData("similarity matrix must be square".into()));
    }
    let m = similarities.rows();
    let norms: Vec<f64> = similarities
        .iter_rows()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(i) = norms.iter().position(|&n| !(n > 0.0 && n.is_finite())) {
        return Err(Error::InvalidData(format!("similarity row {i} has zero or non-finite norm")));
    }
    let raw = Matrix::from_fn(m, m, |i, j| {
        if i == j {
            return 0.0;
        }
        let dot: f64 = similarities.row(i).iter().zip(similarities.row(j)).map(|(a, b)| a * b).sum();
        1.0 - dot / (norms[i] * norms[j])
    });
    Ok(Matrix::from_fn(m, m, |i, j| (0.5 * (raw[(i, j)] + raw[(j, i)])).clamp(0.0, 1.0)))
}

/// Quantile summary of one vector at `len` evenly spaced probabilities,
/// linearly interpolated between order statistics.
pub fn quantile_signature(values: &[f64], len: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    (0..len)
        .map(|k| {
            if n == 1 {
                return sorted[0];
            }
            let p = if len == 1 { 0.5 } else { k as f64 / (len - 1) as f64 };
            let pos = p * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect()
}

/// Per-task pseudo-residual signature: for every output, the quantile
/// signature of the negative loss gradient at the final model on the
/// task's own training data, concatenated across outputs.
pub fn residual_signatures(models: &[BoostedModel], collection: &MultiTaskCollection) -> Result<Vec<Vec<f64>>> {
    check_models(models, collection)?;
    models
        .iter()
        .zip(collection.tasks())
        .map(|(model, task)| {
            let q = model.n_outputs();
            let scores = model.score_matrix(task.features())?;
            let grads = loss::negative_gradients(task.kind(), task.targets(), &scores, q);
            Ok((0..q)
                .flat_map(|out| {
                    let column: Vec<f64> = grads.chunks_exact(q).map(|g| g[out]).collect();
                    quantile_signature(&column, SIGNATURE_LEN)
                })
                .collect())
        })
        .collect()
}

/// Similarity matrix from pseudo-residual signatures: the mean squared
/// difference between signatures plays the role of the cross-task error.
pub fn pseudo_residual_profiles(models: &[BoostedModel], collection: &MultiTaskCollection, epsilon: f64) -> Result<Matrix> {
    let sigs = residual_signatures(models, collection)?;
    let m = sigs.len();
    let gaps = Matrix::from_fn(m, m, |i, j| {
        let (a, b) = (&sigs[i], &sigs[j]);
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
    });
    to_similarity(&gaps, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[&[f64]]) -> Matrix {
        Matrix::from_rows(r, r[0].len()).unwrap()
    }

    #[test]
    fn regression_task_error_is_mse() {
        assert_eq!(task_error(ProblemKind::Regression, &[1.0, 3.0], &[1.0, 2.0]), 0.5);
        assert_eq!(task_error(ProblemKind::Classification, &[1.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(task_error(ProblemKind::Classification, &[1.0, 1.0], &[1.0, 0.0]), 0.5);
    }

    #[test]
    fn similarity_values() {
        let s = to_similarity(&rows(&[&[0.0, 1.0]]), 1e-8).unwrap();
        assert!((s[(0, 0)] - 1e8).abs() < 1e-6);
        assert!((s[(0, 1)] - 0.99999999).abs() < 1e-12);
        assert!(to_similarity(&rows(&[&[f64::NAN]]), 1e-8).is_err());
        assert!(to_similarity(&rows(&[&[1.0]]), 0.0).is_err());
    }

    #[test]
    fn cosine_distance_examples() {
        let d = cosine_distances(&rows(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(d[(0, 1)], 1.0);
        let d = cosine_distances(&rows(&[&[1.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((d[(0, 1)] - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
        assert!((d[(0, 1)] - 0.2928932).abs() < 1e-7);
        let d = cosine_distances(&rows(&[&[2.0, 3.0], &[2.0, 3.0]])).unwrap();
        assert!(d[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn zero_row_is_rejected() {
        assert!(cosine_distances(&rows(&[&[0.0, 0.0], &[1.0, 1.0]])).is_err());
    }

    #[test]
    fn quantile_signature_interpolates() {
        assert_eq!(quantile_signature(&[3.0, 1.0, 2.0], 3), vec![1.0, 2.0, 3.0]);
        assert_eq!(quantile_signature(&[0.0, 1.0], 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(quantile_signature(&[4.0], 2), vec![4.0, 4.0]);
    }
}
