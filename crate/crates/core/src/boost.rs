//! Gradient boosting over decision stumps.
//!
//! Regression fits one stump per round to the residuals `y - F`;
//! classification fits one stump per class per round to `1{y = q} - P_q`.
//! Split search is exact: every midpoint between consecutive distinct
//! feature values is tried.

use serde::{Deserialize, Serialize};

use crate::data::{MultiTaskCollection, ProblemKind, TaskDataset};
use crate::error::{Error, Result};
use crate::loss;
use crate::matrix::Matrix;

/// Depth-one regression tree. A degenerate stump has an infinite threshold
/// and routes every input to `left`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    // JSON has no infinity; the degenerate sentinel is stored as null.
    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Stump {
    pub fn constant(value: f64) -> Self {
        Self {
            feature: 0,
            threshold: f64::INFINITY,
            left: value,
            right: value,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.threshold == f64::INFINITY
    }

    /// Output for a given value of the split feature.
    #[inline]
    pub fn eval_value(&self, value: f64) -> f64 {
        if value <= self.threshold {
            self.left
        } else {
            self.right
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.is_degenerate() {
            self.left
        } else {
            self.eval_value(x[self.feature])
        }
    }

    #[inline]
    fn predict_with<F: Fn(usize) -> f64>(&self, feature: &F) -> f64 {
        if self.is_degenerate() {
            self.left
        } else {
            self.eval_value(feature(self.feature))
        }
    }
}

/// Per-feature row orderings, computed once per training matrix.
#[derive(Clone, Debug)]
pub struct SortedColumns {
    order: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
}

impl SortedColumns {
    pub fn new(features: &Matrix) -> Self {
        let n = features.rows();
        let (order, values) = (0..features.cols())
            .map(|f| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| {
                    features[(a as usize, f)]
                        .total_cmp(&features[(b as usize, f)])
                        .then(a.cmp(&b))
                });
                let vals = idx.iter().map(|&i| features[(i as usize, f)]).collect();
                (idx, vals)
            })
            .unzip();
        Self { order, values }
    }

    pub fn n_rows(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

/// Fits the stump minimizing the (weighted) squared error of `residuals`.
pub fn fit_stump(features: &Matrix, residuals: &[f64], weights: Option<&[f64]>) -> Result<Stump> {
    if residuals.is_empty() {
        return Err(Error::Empty("stump needs at least one row"));
    }
    if features.rows() != residuals.len() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            actual: residuals.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != residuals.len() {
            return Err(Error::DimensionMismatch {
                expected: residuals.len(),
                actual: w.len(),
            });
        }
        if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidData("stump weights must be positive and finite".into()));
        }
    }
    Ok(fit_stump_sorted(&SortedColumns::new(features), residuals, weights))
}

/// Split search on pre-sorted columns. Equal-gain candidates resolve to
/// the smallest feature index, then the smallest threshold.
pub fn fit_stump_sorted(sorted: &SortedColumns, residuals: &[f64], weights: Option<&[f64]>) -> Stump {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut total_w, mut total_s, mut total_s2) = (0.0, 0.0, 0.0);
    for (i, &r) in residuals.iter().enumerate() {
        let wi = w(i);
        total_w += wi;
        total_s += wi * r;
        total_s2 += wi * r * r;
    }
    let base = total_s * total_s / total_w;
    // Gains below this are rounding noise of the single-leaf sum of squares.
    let mut best_gain = 1e-12 * total_s2;
    let mut best: Option<Stump> = None;

    for (f, (order, values)) in sorted.order.iter().zip(&sorted.values).enumerate() {
        let n = order.len();
        let (mut left_w, mut left_s) = (0.0, 0.0);
        for k in 0..n.saturating_sub(1) {
            let i = order[k] as usize;
            let wi = w(i);
            left_w += wi;
            left_s += wi * residuals[i];
            let (lo, hi) = (values[k], values[k + 1]);
            if lo >= hi {
                continue;
            }
            let right_w = total_w - left_w;
            let right_s = total_s - left_s;
            let gain = left_s * left_s / left_w + right_s * right_s / right_w - base;
            if gain > best_gain {
                best_gain = gain;
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Stump {
                    feature: f,
                    threshold,
                    left: left_s / left_w,
                    right: right_s / right_w,
                });
            }
        }
    }
    best.unwrap_or_else(|| Stump::constant(total_s / total_w))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
}

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

impl BoostParams {
    pub fn new(n_rounds: usize) -> Self {
        Self {
            n_rounds,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }

    pub fn with_rate(self, learning_rate: f64) -> Self {
        Self { learning_rate, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} not in (0, 1]",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// What the booster fits at one round, handed to training observers.
pub struct RoundTrace<'a> {
    pub round: usize,
    pub n_outputs: usize,
    /// Scores before the round, `scores[v * n_outputs + q]`.
    pub scores: &'a [f64],
    /// Stump fit targets, same layout as `scores`.
    pub targets: &'a [f64],
}

/// A run of boosting rounds with no initial constant.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoostingBlock {
    /// One entry per round, each holding one stump per output.
    pub stages: Vec<Vec<Stump>>,
}

impl BoostingBlock {
    pub fn n_rounds(&self) -> usize {
        self.stages.len()
    }

    pub fn n_stumps(&self) -> usize {
        self.stages.iter().map(Vec::len).sum()
    }

    /// Adds `learning_rate * h_t(x)` round by round, in training order.
    #[inline]
    pub fn accumulate_with<F: Fn(usize) -> f64>(&self, learning_rate: f64, feature: &F, out: &mut [f64]) {
        for stage in &self.stages {
            for (o, stump) in out.iter_mut().zip(stage) {
                *o += learning_rate * stump.predict_with(feature);
            }
        }
    }
}

/// Training-time inputs shared by the boosting loops.
struct BoostData<'a> {
    features: &'a Matrix,
    sorted: SortedColumns,
    targets: &'a [f64],
    kind: ProblemKind,
    n_outputs: usize,
}

impl<'a> BoostData<'a> {
    fn new(features: &'a Matrix, targets: &'a [f64], kind: ProblemKind, n_outputs: usize) -> Self {
        Self {
            features,
            sorted: SortedColumns::new(features),
            targets,
            kind,
            n_outputs,
        }
    }

    /// Runs `n_rounds` rounds from `scores`, updating them in place.
    fn run(
        &self,
        scores: &mut [f64],
        n_rounds: usize,
        learning_rate: f64,
        observer: &mut dyn FnMut(&RoundTrace<'_>),
    ) -> BoostingBlock {
        let n = self.targets.len();
        let q_out = self.n_outputs;
        let mut stages = Vec::with_capacity(n_rounds);
        let mut grads = vec![0.0; n * q_out];
        let mut column = vec![0.0; n];
        for round in 0..n_rounds {
            for ((&y, s), g) in self
                .targets
                .iter()
                .zip(scores.chunks_exact(q_out))
                .zip(grads.chunks_exact_mut(q_out))
            {
                loss::negative_gradient_into(self.kind, y, s, g);
            }
            observer(&RoundTrace {
                round,
                n_outputs: q_out,
                scores,
                targets: &grads,
            });
            let stage: Vec<Stump> = (0..q_out)
                .map(|q| {
                    for (c, g) in column.iter_mut().zip(grads.chunks_exact(q_out)) {
                        *c = g[q];
                    }
                    fit_stump_sorted(&self.sorted, &column, None)
                })
                .collect();
            for (v, s) in scores.chunks_exact_mut(q_out).enumerate() {
                let x = self.features.row(v);
                for (o, stump) in s.iter_mut().zip(&stage) {
                    *o += learning_rate * stump.predict(x);
                }
            }
            stages.push(stage);
        }
        BoostingBlock { stages }
    }
}

/// Additive stump ensemble `F(x) = init + lr * sum_t h_t(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub kind: ProblemKind,
    pub n_features: usize,
    /// Class count; 0 for regression.
    pub n_classes: usize,
    pub learning_rate: f64,
    pub init: Vec<f64>,
    pub block: BoostingBlock,
}

fn n_outputs(kind: ProblemKind, n_classes: usize) -> usize {
    match kind {
        ProblemKind::Regression => 1,
        ProblemKind::Classification => n_classes,
    }
}

fn validate_targets(features: &Matrix, targets: &[f64], kind: ProblemKind, n_classes: usize) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::Empty("boosting needs at least one sample"));
    }
    if features.rows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            actual: targets.len(),
        });
    }
    if kind == ProblemKind::Classification {
        if n_classes < 2 {
            return Err(Error::InvalidData(format!(
                "classification needs at least 2 classes, got {n_classes}"
            )));
        }
        if targets.iter().any(|&y| y < 0.0 || y.fract() != 0.0 || y as usize >= n_classes) {
            return Err(Error::InvalidData(format!("labels must lie in 0..{n_classes}")));
        }
    }
    Ok(())
}

/// Initial constant: target mean, or log class priors clipped below at `1 / (2n)`.
fn initial_scores(targets: &[f64], kind: ProblemKind, n_classes: usize) -> Vec<f64> {
    let n = targets.len() as f64;
    match kind {
        ProblemKind::Regression => vec![targets.iter().sum::<f64>() / n],
        ProblemKind::Classification => {
            let mut counts = vec![0.0; n_classes];
            for &y in targets {
                counts[y as usize] += 1.0;
            }
            let floor = 1.0 / (2.0 * n);
            counts.iter().map(|c| (c / n).max(floor).ln()).collect()
        }
    }
}

impl BoostedModel {
    pub fn fit(
        features: &Matrix,
        targets: &[f64],
        kind: ProblemKind,
        n_classes: usize,
        params: BoostParams,
    ) -> Result<Self> {
        Self::fit_observed(features, targets, kind, n_classes, params, |_| {})
    }

    /// Fits on one task's samples.
    pub fn fit_task(task: &TaskDataset, n_classes: usize, params: BoostParams) -> Result<Self> {
        Self::fit(task.features(), task.targets(), task.kind(), n_classes, params)
    }

    /// Like [`BoostedModel::fit`], calling `observer` before every round with
    /// the current scores and the gradient targets the round's stumps fit.
    pub fn fit_observed(
        features: &Matrix,
        targets: &[f64],
        kind: ProblemKind,
        n_classes: usize,
        params: BoostParams,
        mut observer: impl FnMut(&RoundTrace<'_>),
    ) -> Result<Self> {
        params.validate()?;
        validate_targets(features, targets, kind, n_classes)?;
        let n_classes = if kind == ProblemKind::Regression { 0 } else { n_classes };
        let q_out = n_outputs(kind, n_classes);
        let init = initial_scores(targets, kind, n_classes);
        let mut scores: Vec<f64> = init.iter().copied().cycle().take(targets.len() * q_out).collect();
        let data = BoostData::new(features, targets, kind, q_out);
        let block = data.run(&mut scores, params.n_rounds, params.learning_rate, &mut observer);
        Ok(Self {
            kind,
            n_features: features.cols(),
            n_classes,
            learning_rate: params.learning_rate,
            init,
            block,
        })
    }

    pub fn n_outputs(&self) -> usize {
        n_outputs(self.kind, self.n_classes)
    }

    pub fn n_rounds(&self) -> usize {
        self.block.n_rounds()
    }

    /// Number of stumps evaluated per prediction.
    pub fn n_stumps(&self) -> usize {
        self.block.n_stumps()
    }

    /// The model after its first `rounds` rounds.
    pub fn truncated(&self, rounds: usize) -> BoostedModel {
        let mut m = self.clone();
        m.block.stages.truncate(rounds);
        m
    }

    fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual,
            });
        }
        Ok(())
    }

    /// Raw scores with features supplied by index; no dimension check.
    #[inline]
    pub fn raw_scores_with<F: Fn(usize) -> f64>(&self, feature: &F, out: &mut [f64]) {
        out.copy_from_slice(&self.init);
        self.block.accumulate_with(self.learning_rate, feature, out);
    }

    pub fn raw_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut out = vec![0.0; self.n_outputs()];
        self.raw_scores_with(&|j| x[j], &mut out);
        Ok(out)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.kind != ProblemKind::Classification {
            return Err(Error::InvalidConfig("probabilities need a classification model".into()));
        }
        Ok(loss::softmax(&self.raw_scores(x)?))
    }

    /// Regression value, or the argmax class index (as `f64`) for classification.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(decide(self.kind, &self.raw_scores(x)?))
    }

    pub fn predict_matrix(&self, features: &Matrix) -> Result<Vec<f64>> {
        self.check_dim(features.cols())?;
        let mut scores = vec![0.0; self.n_outputs()];
        Ok(features
            .iter_rows()
            .map(|x| {
                self.raw_scores_with(&|j| x[j], &mut scores);
                decide(self.kind, &scores)
            })
            .collect())
    }

    /// Raw scores for every row, sample-major.
    pub fn score_matrix(&self, features: &Matrix) -> Result<Vec<f64>> {
        self.check_dim(features.cols())?;
        let q = self.n_outputs();
        let mut out = vec![0.0; features.rows() * q];
        for (x, o) in features.iter_rows().zip(out.chunks_exact_mut(q)) {
            self.raw_scores_with(&|j| x[j], o);
        }
        Ok(out)
    }

    /// Mean training loss of the configured objective on `(features, targets)`.
    pub fn loss(&self, features: &Matrix, targets: &[f64]) -> Result<f64> {
        let scores = self.score_matrix(features)?;
        Ok(loss::mean_loss(self.kind, targets, &scores, self.n_outputs()))
    }
}

/// Turns raw scores into a prediction: the value itself for regression, the
/// first maximal class for classification.
pub fn decide(kind: ProblemKind, scores: &[f64]) -> f64 {
    match kind {
        ProblemKind::Regression => scores[0],
        ProblemKind::Classification => argmax(scores) as f64,
    }
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Two-block multi-task boosting: a shared block on the pooled tasks, then
/// a task-specific block per task continuing from the shared scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MtgbModel {
    pub shared: BoostedModel,
    /// Indexed by task id.
    pub specific: Vec<BoostingBlock>,
    pub block_sizes: (usize, usize),
}

impl MtgbModel {
    pub fn fit(
        collection: &MultiTaskCollection,
        shared_rounds: usize,
        specific_rounds: usize,
        learning_rate: f64,
    ) -> Result<Self> {
        let params = BoostParams {
            n_rounds: shared_rounds,
            learning_rate,
        };
        params.validate()?;
        let kind = collection.kind();
        let n_classes = collection.n_classes();
        let pooled = Matrix::vstack(collection.tasks().iter().map(|t| t.features()), collection.n_features())?;
        let targets: Vec<f64> = collection.tasks().iter().flat_map(|t| t.targets().iter().copied()).collect();

        validate_targets(&pooled, &targets, kind, n_classes)?;
        let q_out = n_outputs(kind, n_classes);
        let init = initial_scores(&targets, kind, n_classes);
        let mut scores: Vec<f64> = init.iter().copied().cycle().take(targets.len() * q_out).collect();
        let block = BoostData::new(&pooled, &targets, kind, q_out).run(&mut scores, shared_rounds, learning_rate, &mut |_| {});
        let shared = BoostedModel {
            kind,
            n_features: collection.n_features(),
            n_classes,
            learning_rate,
            init,
            block,
        };

        let mut offset = 0;
        let mut specific = Vec::with_capacity(collection.n_tasks());
        for task in collection.tasks() {
            let n = task.n_samples();
            let task_scores = &mut scores[offset * q_out..(offset + n) * q_out];
            let data = BoostData::new(task.features(), task.targets(), kind, q_out);
            specific.push(data.run(task_scores, specific_rounds, learning_rate, &mut |_| {}));
            offset += n;
        }
        Ok(Self {
            shared,
            specific,
            block_sizes: (shared_rounds, specific_rounds),
        })
    }

    pub fn n_tasks(&self) -> usize {
        self.specific.len()
    }

    #[inline]
    pub fn raw_scores_with<F: Fn(usize) -> f64>(&self, task: usize, feature: &F, out: &mut [f64]) -> Result<()> {
        let block = self.specific.get(task).ok_or(Error::UnknownTask(task))?;
        self.shared.raw_scores_with(feature, out);
        block.accumulate_with(self.shared.learning_rate, feature, out);
        Ok(())
    }

    pub fn raw_scores(&self, task: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.shared.check_dim(x.len())?;
        let mut out = vec![0.0; self.shared.n_outputs()];
        self.raw_scores_with(task, &|j| x[j], &mut out)?;
        Ok(out)
    }

    pub fn predict(&self, task: usize, x: &[f64]) -> Result<f64> {
        Ok(decide(self.shared.kind, &self.raw_scores(task, x)?))
    }

    pub fn predict_matrix(&self, task: usize, features: &Matrix) -> Result<Vec<f64>> {
        self.shared.check_dim(features.cols())?;
        let mut scores = vec![0.0; self.shared.n_outputs()];
        features
            .iter_rows()
            .map(|x| {
                self.raw_scores_with(task, &|j| x[j], &mut scores)?;
                Ok(decide(self.shared.kind, &scores))
            })
            .collect()
    }

    /// Stumps evaluated for one prediction of `task`.
    pub fn n_stumps(&self, task: usize) -> usize {
        self.shared.n_stumps() + self.specific.get(task).map_or(0, BoostingBlock::n_stumps)
    }
}
