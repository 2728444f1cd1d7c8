//! Task-level evaluation metrics.

use std::collections::BTreeMap;

use rmb_cle::ProblemKind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLASSIFICATION_METRICS: [&str; 3] = ["accuracy", "macro_recall", "macro_f1"];
pub const REGRESSION_METRICS: [&str; 2] = ["rmse", "mae"];

pub fn metric_names(kind: ProblemKind) -> &'static [&'static str] {
    match kind {
        ProblemKind::Classification => &CLASSIFICATION_METRICS,
        ProblemKind::Regression => &REGRESSION_METRICS,
    }
}

/// Whether larger values of `metric` are better.
pub fn higher_is_better(metric: &str) -> bool {
    !matches!(metric, "rmse" | "mae")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Classes of the label space with no true samples; they count as 0 in the macro averages.
    pub absent_classes: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
}

fn check(predictions: &[f64], targets: &[f64]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::Empty("metrics need at least one sample"));
    }
    if predictions.len() != targets.len() {
        return Err(Error::Core(rmb_cle::Error::DimensionMismatch {
            expected: targets.len(),
            actual: predictions.len(),
        }));
    }
    Ok(())
}

pub fn classification_metrics(predictions: &[f64], targets: &[f64], n_classes: usize) -> Result<ClassificationMetrics> {
    check(predictions, targets)?;
    let q = n_classes.max(1);
    let mut confusion = vec![vec![0usize; q]; q];
    for (&p, &y) in predictions.iter().zip(targets) {
        let (p, y) = (p as usize, y as usize);
        if p >= q || y >= q {
            return Err(Error::Config(format!("label outside 0..{q}")));
        }
        confusion[y][p] += 1;
    }
    let correct: usize = (0..q).map(|c| confusion[c][c]).sum();
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut absent_classes = Vec::new();
    for c in 0..q {
        let actual: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let tp = confusion[c][c] as f64;
        if actual == 0 {
            absent_classes.push(c);
            continue;
        }
        let recall = tp / actual as f64;
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        recall_sum += recall;
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / targets.len() as f64,
        macro_recall: recall_sum / q as f64,
        macro_f1: f1_sum / q as f64,
        absent_classes,
    })
}

pub fn regression_metrics(predictions: &[f64], targets: &[f64]) -> Result<RegressionMetrics> {
    check(predictions, targets)?;
    let n = targets.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, y) in predictions.iter().zip(targets) {
        se += (p - y) * (p - y);
        ae += (p - y).abs();
    }
    Ok(RegressionMetrics {
        rmse: (se / n).sqrt(),
        mae: ae / n,
    })
}

/// Named metrics for one task.
pub fn evaluate(kind: ProblemKind, predictions: &[f64], targets: &[f64], n_classes: usize) -> Result<BTreeMap<String, f64>> {
    Ok(match kind {
        ProblemKind::Classification => {
            let m = classification_metrics(predictions, targets, n_classes)?;
            BTreeMap::from([
                ("accuracy".to_string(), m.accuracy),
                ("macro_recall".to_string(), m.macro_recall),
                ("macro_f1".to_string(), m.macro_f1),
                ("absent_classes".to_string(), m.absent_classes.len() as f64),
            ])
        }
        ProblemKind::Regression => {
            let m = regression_metrics(predictions, targets)?;
            BTreeMap::from([("rmse".to_string(), m.rmse), ("mae".to_string(), m.mae)])
        }
    })
}

/// Model-selection objective: accuracy, or negative RMSE.
pub fn selection_score(kind: ProblemKind, predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check(predictions, targets)?;
    Ok(match kind {
        ProblemKind::Classification => {
            predictions.iter().zip(targets).filter(|(p, y)| p == y).count() as f64 / targets.len() as f64
        }
        ProblemKind::Regression => -regression_metrics(predictions, targets)?.rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [0.0, 1.0, 1.0, 2.0];
        let m = classification_metrics(&y, &y, 3).unwrap();
        assert_eq!((m.accuracy, m.macro_recall, m.macro_f1), (1.0, 1.0, 1.0));
        let r = regression_metrics(&[1.5, -2.0], &[1.5, -2.0]).unwrap();
        assert_eq!((r.rmse, r.mae), (0.0, 0.0));
    }

    #[test]
    fn binary_hand_count() {
        let m = classification_metrics(&[1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 1.0, 0.0], 2).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.macro_recall, 0.5);
        assert_eq!(m.macro_f1, 0.5);
    }

    #[test]
    fn absent_class_counts_as_zero() {
        let m = classification_metrics(&[0.0, 1.0], &[0.0, 1.0], 3).unwrap();
        assert_eq!(m.absent_classes, vec![2]);
        assert!((m.macro_recall - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rmse_dominates_mae() {
        let r = regression_metrics(&[0.0, 0.0, 0.0], &[1.0, -2.0, 0.5]).unwrap();
        assert!(r.rmse >= r.mae);
        assert!((r.mae - 3.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(regression_metrics(&[], &[]).is_err());
        assert!(classification_metrics(&[], &[], 2).is_err());
    }
}
