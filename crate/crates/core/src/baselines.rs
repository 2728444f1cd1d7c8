//! Comparison methods: single-task, data pooling, task-as-feature,
//! two-block MTGB and the cluster-known oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{decide, BoostParams, BoostedModel, MtgbModel};
use crate::data::MultiTaskCollection;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pipeline::{pool, pool_with_indicators, RmbCleConfig, RmbCleModel, TaskPredictor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    SingleTask,
    DataPooling,
    TaskAsFeature,
    Mtgb,
    ClusterKnown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineSpec {
    SingleTask { rounds: usize },
    DataPooling { rounds: usize },
    TaskAsFeature { rounds: usize },
    Mtgb { shared_rounds: usize, specific_rounds: usize },
    ClusterKnown { partition: Vec<usize>, config: RmbCleConfig },
}

impl BaselineSpec {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineSpec::SingleTask { .. } => BaselineKind::SingleTask,
            BaselineSpec::DataPooling { .. } => BaselineKind::DataPooling,
            BaselineSpec::TaskAsFeature { .. } => BaselineKind::TaskAsFeature,
            BaselineSpec::Mtgb { .. } => BaselineKind::Mtgb,
            BaselineSpec::ClusterKnown { .. } => BaselineKind::ClusterKnown,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineModel {
    SingleTask { models: Vec<BoostedModel> },
    DataPooling { model: BoostedModel, n_tasks: usize },
    /// Input is `[x; one-hot(task)]` over all tasks.
    TaskAsFeature { model: BoostedModel, n_tasks: usize },
    Mtgb { model: MtgbModel },
    ClusterKnown { model: RmbCleModel },
}

pub fn train_baseline(spec: &BaselineSpec, collection: &MultiTaskCollection, learning_rate: f64) -> Result<BaselineModel> {
    let kind = collection.kind();
    let q = collection.n_classes();
    let d = collection.n_features();
    let m = collection.n_tasks();
    let tasks: Vec<_> = collection.tasks().iter().collect();
    let params = |rounds| BoostParams::new(rounds).with_rate(learning_rate);
    Ok(match spec {
        BaselineSpec::SingleTask { rounds } => BaselineModel::SingleTask {
            models: collection
                .tasks()
                .par_iter()
                .map(|t| BoostedModel::fit_task(t, q, params(*rounds)))
                .collect::<Result<_>>()?,
        },
        BaselineSpec::DataPooling { rounds } => {
            let (x, y) = pool(&tasks, d)?;
            BaselineModel::DataPooling {
                model: BoostedModel::fit(&x, &y, kind, q, params(*rounds))?,
                n_tasks: m,
            }
        }
        BaselineSpec::TaskAsFeature { rounds } => {
            let (x, y) = pool_with_indicators(&tasks, d);
            BaselineModel::TaskAsFeature {
                model: BoostedModel::fit(&x, &y, kind, q, params(*rounds))?,
                n_tasks: m,
            }
        }
        BaselineSpec::Mtgb {
            shared_rounds,
            specific_rounds,
        } => BaselineModel::Mtgb {
            model: MtgbModel::fit(collection, *shared_rounds, *specific_rounds, learning_rate)?,
        },
        BaselineSpec::ClusterKnown { partition, config } => {
            let config = RmbCleConfig {
                learning_rate,
                ..*config
            };
            BaselineModel::ClusterKnown {
                model: RmbCleModel::train_with_partition(collection, &config, partition)?,
            }
        }
    })
}

/// Single-task models with a separately chosen round count per task.
pub fn train_single_task(collection: &MultiTaskCollection, rounds: &[usize], learning_rate: f64) -> Result<BaselineModel> {
    if rounds.len() != collection.n_tasks() {
        return Err(Error::DimensionMismatch {
            expected: collection.n_tasks(),
            actual: rounds.len(),
        });
    }
    let q = collection.n_classes();
    let models = collection
        .tasks()
        .par_iter()
        .zip(rounds)
        .map(|(t, &r)| BoostedModel::fit_task(t, q, BoostParams::new(r).with_rate(learning_rate)))
        .collect::<Result<_>>()?;
    Ok(BaselineModel::SingleTask { models })
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineModel::SingleTask { .. } => BaselineKind::SingleTask,
            BaselineModel::DataPooling { .. } => BaselineKind::DataPooling,
            BaselineModel::TaskAsFeature { .. } => BaselineKind::TaskAsFeature,
            BaselineModel::Mtgb { .. } => BaselineKind::Mtgb,
            BaselineModel::ClusterKnown { .. } => BaselineKind::ClusterKnown,
        }
    }

    fn check_task(&self, task: usize) -> Result<()> {
        if task >= self.n_tasks() {
            return Err(Error::UnknownTask(task));
        }
        Ok(())
    }

    pub fn predict(&self, task: usize, x: &[f64]) -> Result<f64> {
        let features = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.predict_task(task, &features)?[0])
    }
}

impl TaskPredictor for BaselineModel {
    fn n_tasks(&self) -> usize {
        match self {
            BaselineModel::SingleTask { models } => models.len(),
            BaselineModel::DataPooling { n_tasks, .. } | BaselineModel::TaskAsFeature { n_tasks, .. } => *n_tasks,
            BaselineModel::Mtgb { model } => model.n_tasks(),
            BaselineModel::ClusterKnown { model } => model.n_tasks(),
        }
    }

    fn predict_task(&self, task: usize, features: &Matrix) -> Result<Vec<f64>> {
        self.check_task(task)?;
        match self {
            BaselineModel::SingleTask { models } => models[task].predict_matrix(features),
            BaselineModel::DataPooling { model, .. } => model.predict_matrix(features),
            BaselineModel::TaskAsFeature { model, .. } => {
                let d = features.cols();
                if d + self.n_tasks() != model.n_features {
                    return Err(Error::DimensionMismatch {
                        expected: model.n_features - self.n_tasks(),
                        actual: d,
                    });
                }
                let mut scores = vec![0.0; model.n_outputs()];
                Ok(features
                    .iter_rows()
                    .map(|x| {
                        let feature = |j: usize| {
                            if j < d {
                                x[j]
                            } else if j - d == task {
                                1.0
                            } else {
                                0.0
                            }
                        };
                        model.raw_scores_with(&feature, &mut scores);
                        decide(model.kind, &scores)
                    })
                    .collect())
            }
            BaselineModel::Mtgb { model } => model.predict_matrix(task, features),
            BaselineModel::ClusterKnown { model } => model.predict_matrix(task, features),
        }
    }

    fn prediction_cost(&self, task: usize) -> Result<usize> {
        self.check_task(task)?;
        Ok(match self {
            BaselineModel::SingleTask { models } => models[task].n_stumps(),
            BaselineModel::DataPooling { model, .. } | BaselineModel::TaskAsFeature { model, .. } => model.n_stumps(),
            BaselineModel::Mtgb { model } => model.n_stumps(task),
            BaselineModel::ClusterKnown { model } => model.prediction_cost(task)?,
        })
    }
}
