//! K-fold grid search over block sizes, folding each task independently.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use rmb_cle::baselines::BaselineModel;
use rmb_cle::pipeline::{cluster_tasks, task_geometry};
use rmb_cle::{rng, MultiTaskCollection, RmbCleModel, TaskPredictor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::{BlockSizes, FitContext, Fitted, Method};
use crate::metrics::selection_score;

pub const DEFAULT_FOLDS: usize = 5;

/// Fold index of every training row, per task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Folds {
    pub k: usize,
    pub assignment: Vec<Vec<usize>>,
}

/// Folds shrink to the smallest task size when tasks are tiny.
pub fn make_folds(collection: &MultiTaskCollection, requested: usize, seed: u64) -> Result<Folds> {
    let smallest = collection.tasks().iter().map(|t| t.n_samples()).min().unwrap_or(0);
    let k = requested.min(smallest);
    if k < 2 {
        return Err(Error::Config(format!(
            "cross-validation needs at least 2 folds; requested {requested}, smallest task has {smallest} rows"
        )));
    }
    let assignment = collection
        .tasks()
        .iter()
        .map(|t| {
            let mut order: Vec<usize> = (0..t.n_samples()).collect();
            order.shuffle(&mut rng::stream(seed, "cv-fold", t.task_id() as u64));
            let mut fold = vec![0; order.len()];
            for (pos, &row) in order.iter().enumerate() {
                fold[row] = pos % k;
            }
            fold
        })
        .collect();
    Ok(Folds { k, assignment })
}

impl Folds {
    /// Training and validation collections for fold `f`.
    pub fn split(&self, collection: &MultiTaskCollection, f: usize) -> Result<(MultiTaskCollection, MultiTaskCollection)> {
        let mut fit = Vec::with_capacity(collection.n_tasks());
        let mut valid = Vec::with_capacity(collection.n_tasks());
        for (task, folds) in collection.tasks().iter().zip(&self.assignment) {
            let (inside, outside): (Vec<usize>, Vec<usize>) = (0..folds.len()).partition(|&r| folds[r] != f);
            fit.push(task.select(&inside));
            valid.push(task.select(&outside));
        }
        let q = collection.n_classes();
        Ok((
            MultiTaskCollection::with_classes(fit, q)?,
            MultiTaskCollection::with_classes(valid, q)?,
        ))
    }
}

/// Chosen block sizes: one for all tasks, or one per task for single-task boosting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Selection {
    Shared(BlockSizes),
    PerTask(Vec<BlockSizes>),
}

impl Selection {
    pub fn describe(&self) -> String {
        match self {
            Selection::Shared(b) => b.to_string(),
            Selection::PerTask(bs) => {
                let rounds: Vec<String> = bs.iter().map(|b| b.s2.to_string()).collect();
                format!("s2=[{}]", rounds.join(" "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub selection: Selection,
    /// Mean validation score per grid point; empty when the grid had one point.
    pub trace: Vec<(BlockSizes, f64)>,
}

/// Index of the best score; ties go to the smallest total block size, then grid order.
fn argmax(points: &[BlockSizes], scores: impl Fn(usize) -> f64) -> usize {
    (0..points.len())
        .reduce(|best, i| {
            let (a, b) = (scores(i), scores(best));
            if a > b || (a == b && points[i].total() < points[best].total()) {
                i
            } else {
                best
            }
        })
        .unwrap_or(0)
}

fn truncate(fitted: &Fitted, blocks: BlockSizes) -> Option<Fitted> {
    let model = match fitted {
        Fitted::Baseline(BaselineModel::SingleTask { models }) => BaselineModel::SingleTask {
            models: models.iter().map(|m| m.truncated(blocks.s2)).collect(),
        },
        Fitted::Baseline(BaselineModel::DataPooling { model, n_tasks }) => BaselineModel::DataPooling {
            model: model.truncated(blocks.s1),
            n_tasks: *n_tasks,
        },
        Fitted::Baseline(BaselineModel::TaskAsFeature { model, n_tasks }) => BaselineModel::TaskAsFeature {
            model: model.truncated(blocks.s1),
            n_tasks: *n_tasks,
        },
        _ => return None,
    };
    Some(Fitted::Baseline(model))
}

/// Rounds of the per-task models that determine the partition.
fn per_task_rounds(method: Method, blocks: BlockSizes) -> usize {
    match method {
        Method::RmbClePooled => blocks.s2,
        _ => blocks.s4,
    }
}

/// Validation score of every grid point on one fold, per task.
fn fold_scores(
    method: Method,
    ctx: &FitContext,
    points: &[BlockSizes],
    fit: &MultiTaskCollection,
    valid: &MultiTaskCollection,
) -> Result<Vec<Vec<f64>>> {
    let score = |model: &Fitted| -> Result<Vec<f64>> {
        valid
            .tasks()
            .iter()
            .enumerate()
            .map(|(t, task)| {
                let p = model.predict_task(t, task.features())?;
                selection_score(valid.kind(), &p, task.targets())
            })
            .collect()
    };
    match method {
        // Fewer rounds is a prefix of more rounds, so one fit serves the whole grid.
        Method::St | Method::Dp | Method::Taf => {
            let largest = points.iter().copied().max_by_key(|b| b.total()).unwrap_or_default();
            let full = ctx.fit(method, largest, fit)?;
            points
                .par_iter()
                .map(|&b| score(&truncate(&full, b).expect("single-block model")))
                .collect()
        }
        Method::RmbClePooled | Method::RmbCleMtgb => {
            let mut rounds: Vec<usize> = points.iter().map(|&b| per_task_rounds(method, b)).collect();
            rounds.sort_unstable();
            rounds.dedup();
            let partitions: BTreeMap<usize, Vec<usize>> = rounds
                .par_iter()
                .map(|&r| {
                    let blocks = points.iter().copied().find(|&b| per_task_rounds(method, b) == r).unwrap();
                    let config = ctx.rmb_config(method, blocks)?;
                    let labels = if fit.n_tasks() == 1 {
                        vec![0]
                    } else {
                        cluster_tasks(&task_geometry(fit, &config)?, &config)?.1.assignment
                    };
                    Ok((r, labels))
                })
                .collect::<Result<_>>()?;
            points
                .par_iter()
                .map(|&b| {
                    let config = ctx.rmb_config(method, b)?;
                    let labels = &partitions[&per_task_rounds(method, b)];
                    score(&Fitted::RmbCle(RmbCleModel::train_with_partition(fit, &config, labels)?))
                })
                .collect()
        }
        _ => points.par_iter().map(|&b| score(&ctx.fit(method, b, fit)?)).collect(),
    }
}

/// Picks block sizes for `method` by K-fold cross-validation on `train`.
pub fn grid_search(
    method: Method,
    ctx: &FitContext,
    train: &MultiTaskCollection,
    points: &[BlockSizes],
    folds: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if points.is_empty() {
        return Err(Error::Empty("grid has no points"));
    }
    let m = train.n_tasks();
    if points.len() == 1 {
        let selection = match method {
            Method::St => Selection::PerTask(vec![points[0]; m]),
            _ => Selection::Shared(points[0]),
        };
        return Ok(SearchOutcome { selection, trace: Vec::new() });
    }
    let folds = make_folds(train, folds, seed)?;
    let per_fold = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let (fit, valid) = folds.split(train, f)?;
            fold_scores(method, ctx, points, &fit, &valid)
        })
        .collect::<Result<Vec<_>>>()?;
    // Mean over folds, per point and task.
    let task_scores: Vec<Vec<f64>> = (0..points.len())
        .map(|p| (0..m).map(|t| per_fold.iter().map(|s| s[p][t]).sum::<f64>() / folds.k as f64).collect())
        .collect();
    let overall: Vec<f64> = task_scores.iter().map(|s| s.iter().sum::<f64>() / m as f64).collect();
    let trace = points.iter().copied().zip(overall.iter().copied()).collect();
    let selection = match method {
        Method::St => Selection::PerTask((0..m).map(|t| points[argmax(points, |p| task_scores[p][t])]).collect()),
        _ => Selection::Shared(points[argmax(points, |p| overall[p])]),
    };
    Ok(SearchOutcome { selection, trace })
}

/// Fits `method` on all of `train` with the selected block sizes.
pub fn fit_selected(method: Method, ctx: &FitContext, train: &MultiTaskCollection, selection: &Selection) -> Result<Fitted> {
    match selection {
        Selection::Shared(b) => ctx.fit(method, *b, train),
        Selection::PerTask(bs) => {
            let rounds: Vec<usize> = bs.iter().map(|b| b.s2).collect();
            ctx.fit_single_task(&rounds, train)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rmb_cle::{Matrix, ProblemKind, TaskDataset};

    fn coll(sizes: &[usize]) -> MultiTaskCollection {
        let tasks = sizes
            .iter()
            .enumerate()
            .map(|(t, &n)| {
                let xs: Vec<f64> = (0..n).map(|i| ((i * 37 + t * 11) % 23) as f64).collect();
                let ys = xs.iter().map(|x| (x * 0.4).sin() + t as f64).collect();
                TaskDataset::new(t, Matrix::from_vec(n, 1, xs).unwrap(), ys, ProblemKind::Regression).unwrap()
            })
            .collect();
        MultiTaskCollection::new(tasks).unwrap()
    }

    #[test]
    fn folds_cover_rows_evenly() {
        let c = coll(&[23, 10]);
        let f = make_folds(&c, 5, 3).unwrap();
        assert_eq!(f.k, 5);
        for rows in &f.assignment {
            let mut counts = vec![0; 5];
            rows.iter().for_each(|&k| counts[k] += 1);
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
        let (fit, valid) = f.split(&c, 0).unwrap();
        assert_eq!(fit.n_samples() + valid.n_samples(), c.n_samples());
    }

    #[test]
    fn folds_shrink_for_tiny_tasks() {
        assert_eq!(make_folds(&coll(&[30, 3]), 5, 0).unwrap().k, 3);
        assert!(make_folds(&coll(&[30, 1]), 5, 0).is_err());
    }

    #[test]
    fn ties_prefer_smaller_blocks() {
        let points = [
            BlockSizes { s1: 50, s2: 0, s4: 0 },
            BlockSizes { s1: 20, s2: 0, s4: 0 },
            BlockSizes { s1: 30, s2: 0, s4: 0 },
        ];
        assert_eq!(argmax(&points, |_| 1.0), 1);
        assert_eq!(argmax(&points, |i| [0.0, 1.0, 2.0][i]), 2);
    }

    #[test]
    fn truncation_equals_refitting() {
        let c = coll(&[30, 25]);
        let ctx = FitContext::new(0.1);
        for method in [Method::St, Method::Dp, Method::Taf] {
            let big = BlockSizes { s1: 40, s2: 40, s4: 0 };
            let small = BlockSizes { s1: 15, s2: 15, s4: 0 };
            let cut = truncate(&ctx.fit(method, big, &c).unwrap(), small).unwrap();
            assert_eq!(cut, ctx.fit(method, small, &c).unwrap());
        }
    }

    #[test]
    fn search_is_deterministic_and_single_point_skips_cv() {
        let c = coll(&[30, 25, 28]);
        let ctx = FitContext::new(0.1);
        let points = [BlockSizes { s1: 5, s2: 0, s4: 0 }, BlockSizes { s1: 60, s2: 0, s4: 0 }];
        let a = grid_search(Method::Dp, &ctx, &c, &points, 5, 1).unwrap();
        let b = grid_search(Method::Dp, &ctx, &c, &points, 5, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len(), 2);
        let one = grid_search(Method::St, &ctx, &c, &points[..1], 5, 1).unwrap();
        assert!(one.trace.is_empty());
        assert_eq!(one.selection, Selection::PerTask(vec![points[0]; 3]));
        assert!(grid_search(Method::Dp, &ctx, &c, &[], 5, 1).is_err());
    }
}
