//! Training and prediction for clustered multi-task boosting: per-task
//! models, task geometry, clustering, then one local ensemble per cluster.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{decide, BoostParams, BoostedModel, MtgbModel, DEFAULT_LEARNING_RATE};
use crate::clustering::{self, Dendrogram, Linkage, Partition};
use crate::data::{MultiTaskCollection, ProblemKind, TaskDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::similarity::{SimilarityGeometry, SimilaritySource, DEFAULT_EPSILON};

/// Anything that predicts per task from a feature matrix.
pub trait TaskPredictor {
    fn n_tasks(&self) -> usize;

    fn predict_task(&self, task: usize, features: &Matrix) -> Result<Vec<f64>>;

    /// Stumps evaluated for one prediction of `task`.
    fn prediction_cost(&self, task: usize) -> Result<usize>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LocalEnsemble {
    /// One model on the pooled cluster data with one-hot task columns.
    Pooled { rounds: usize },
    /// Shared block on the cluster, then a specific block per task.
    TwoBlockMtgb { shared_rounds: usize, specific_rounds: usize },
}

impl LocalEnsemble {
    pub fn total_rounds(&self) -> usize {
        match *self {
            LocalEnsemble::Pooled { rounds } => rounds,
            LocalEnsemble::TwoBlockMtgb {
                shared_rounds,
                specific_rounds,
            } => shared_rounds + specific_rounds,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmbCleConfig {
    /// Rounds of each per-task model used to measure cross-task errors.
    pub per_task_rounds: usize,
    pub local: LocalEnsemble,
    pub learning_rate: f64,
    pub epsilon: f64,
    /// Largest cluster count scanned; `None` means `clustering::default_k_max(m)`.
    pub k_max: Option<usize>,
    pub similarity_source: SimilaritySource,
    pub linkage: Linkage,
}

impl Default for RmbCleConfig {
    fn default() -> Self {
        Self {
            per_task_rounds: 100,
            local: LocalEnsemble::Pooled { rounds: 100 },
            learning_rate: DEFAULT_LEARNING_RATE,
            epsilon: DEFAULT_EPSILON,
            k_max: None,
            similarity_source: SimilaritySource::CrossTaskError,
            linkage: Linkage::Average,
        }
    }
}

impl RmbCleConfig {
    pub fn pooled(per_task_rounds: usize, rounds: usize) -> Self {
        Self {
            per_task_rounds,
            local: LocalEnsemble::Pooled { rounds },
            ..Self::default()
        }
    }

    pub fn two_block(per_task_rounds: usize, shared_rounds: usize, specific_rounds: usize) -> Self {
        Self {
            per_task_rounds,
            local: LocalEnsemble::TwoBlockMtgb {
                shared_rounds,
                specific_rounds,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        BoostParams::new(self.per_task_rounds).with_rate(self.learning_rate).validate()?;
        if let LocalEnsemble::Pooled { rounds: 0 } = self.local {
            return Err(Error::InvalidConfig("pooled local ensembles need at least one round".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon {} must be positive", self.epsilon)));
        }
        if matches!(self.k_max, Some(k) if k < 2) {
            return Err(Error::InvalidConfig("k_max must be at least 2".into()));
        }
        Ok(())
    }
}

/// Local ensemble of one cluster; `tasks` lists its global task ids ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClusterModel {
    /// Input is `[x; one-hot(position of the task in tasks)]`.
    Pooled { tasks: Vec<usize>, model: BoostedModel },
    TwoBlockMtgb { tasks: Vec<usize>, model: MtgbModel },
}

impl ClusterModel {
    pub fn tasks(&self) -> &[usize] {
        match self {
            ClusterModel::Pooled { tasks, .. } | ClusterModel::TwoBlockMtgb { tasks, .. } => tasks,
        }
    }

    /// Raw scores for the task at `local` position, features by index.
    #[inline]
    fn scores_into(&self, local: usize, n_features: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            ClusterModel::Pooled { model, .. } => {
                let feature = |j: usize| {
                    if j < n_features {
                        x[j]
                    } else if j - n_features == local {
                        1.0
                    } else {
                        0.0
                    }
                };
                model.raw_scores_with(&feature, out);
                Ok(())
            }
            ClusterModel::TwoBlockMtgb { model, .. } => model.raw_scores_with(local, &|j| x[j], out),
        }
    }

    fn n_stumps(&self, local: usize) -> usize {
        match self {
            ClusterModel::Pooled { model, .. } => model.n_stumps(),
            ClusterModel::TwoBlockMtgb { model, .. } => model.n_stumps(local),
        }
    }
}

/// Stacks the tasks' rows, appending one indicator column per task.
pub fn pool_with_indicators(tasks: &[&TaskDataset], n_features: usize) -> (Matrix, Vec<f64>) {
    let m = tasks.len();
    let n: usize = tasks.iter().map(|t| t.n_samples()).sum();
    let mut features = Matrix::zeros(n, n_features + m);
    let mut targets = Vec::with_capacity(n);
    let mut row = 0;
    for (pos, task) in tasks.iter().enumerate() {
        for (x, &y) in task.features().iter_rows().zip(task.targets()) {
            let out = features.row_mut(row);
            out[..n_features].copy_from_slice(x);
            out[n_features + pos] = 1.0;
            targets.push(y);
            row += 1;
        }
    }
    (features, targets)
}

/// Stacks the tasks' rows without task information.
pub fn pool(tasks: &[&TaskDataset], n_features: usize) -> Result<(Matrix, Vec<f64>)> {
    let features = Matrix::vstack(tasks.iter().map(|t| t.features()), n_features)?;
    let targets = tasks.iter().flat_map(|t| t.targets().iter().copied()).collect();
    Ok((features, targets))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmbCleModel {
    pub config: RmbCleConfig,
    pub kind: ProblemKind,
    pub n_features: usize,
    pub n_classes: usize,
    pub partition: Partition,
    /// Position of each task inside its cluster.
    pub local_index: Vec<usize>,
    pub clusters: Vec<ClusterModel>,
    /// Absent when the partition was supplied or there is a single task.
    pub geometry: Option<SimilarityGeometry>,
    pub dendrogram: Option<Dendrogram>,
}

/// Fits one boosted model per task.
pub fn fit_per_task(collection: &MultiTaskCollection, rounds: usize, learning_rate: f64) -> Result<Vec<BoostedModel>> {
    let params = BoostParams::new(rounds).with_rate(learning_rate);
    collection
        .tasks()
        .par_iter()
        .map(|t| BoostedModel::fit_task(t, collection.n_classes(), params))
        .collect()
}

/// Task geometry from freshly fitted per-task models.
pub fn task_geometry(collection: &MultiTaskCollection, config: &RmbCleConfig) -> Result<SimilarityGeometry> {
    let models = fit_per_task(collection, config.per_task_rounds, config.learning_rate)?;
    SimilarityGeometry::build(&models, collection, config.epsilon, config.similarity_source)
}

/// Dendrogram and selected partition for a task geometry.
pub fn cluster_tasks(geometry: &SimilarityGeometry, config: &RmbCleConfig) -> Result<(Dendrogram, Partition)> {
    let m = geometry.distances.rows();
    let dendrogram = clustering::linkage(&geometry.distances, config.linkage)?;
    let k_max = config.k_max.unwrap_or_else(|| clustering::default_k_max(m));
    let partition = clustering::select_k(&dendrogram, &geometry.distances, k_max)?;
    Ok((dendrogram, partition))
}

impl RmbCleModel {
    /// Full training: per-task models, geometry, clustering, local ensembles.
    pub fn train(collection: &MultiTaskCollection, config: &RmbCleConfig) -> Result<Self> {
        config.validate()?;
        if collection.n_tasks() == 1 {
            let partition = Partition::from_labels(&[0])?;
            return Self::fit_local(collection, config, partition, None, None);
        }
        let geometry = task_geometry(collection, config)?;
        let (dendrogram, partition) = cluster_tasks(&geometry, config)?;
        Self::fit_local(collection, config, partition, Some(geometry), Some(dendrogram))
    }

    /// Training with a known partition; similarity and clustering are skipped.
    pub fn train_with_partition(collection: &MultiTaskCollection, config: &RmbCleConfig, labels: &[usize]) -> Result<Self> {
        config.validate()?;
        if labels.len() != collection.n_tasks() {
            return Err(Error::DimensionMismatch {
                expected: collection.n_tasks(),
                actual: labels.len(),
            });
        }
        let partition = Partition::from_labels(labels)?;
        Self::fit_local(collection, config, partition, None, None)
    }

    fn fit_local(
        collection: &MultiTaskCollection,
        config: &RmbCleConfig,
        partition: Partition,
        geometry: Option<SimilarityGeometry>,
        dendrogram: Option<Dendrogram>,
    ) -> Result<Self> {
        let groups = partition.clusters();
        let mut local_index = vec![0; collection.n_tasks()];
        for members in &groups {
            for (pos, &t) in members.iter().enumerate() {
                local_index[t] = pos;
            }
        }
        let clusters = groups
            .par_iter()
            .map(|members| fit_cluster(collection, config, members))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: *config,
            kind: collection.kind(),
            n_features: collection.n_features(),
            n_classes: collection.n_classes(),
            partition,
            local_index,
            clusters,
            geometry,
            dendrogram,
        })
    }

    pub fn n_outputs(&self) -> usize {
        match self.kind {
            ProblemKind::Regression => 1,
            ProblemKind::Classification => self.n_classes,
        }
    }

    /// Cluster model and local position serving `task`.
    pub fn route(&self, task: usize) -> Result<(&ClusterModel, usize)> {
        let c = *self.partition.assignment.get(task).ok_or(Error::UnknownTask(task))?;
        Ok((&self.clusters[c], self.local_index[task]))
    }

    pub fn raw_scores(&self, task: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let (cluster, local) = self.route(task)?;
        let mut out = vec![0.0; self.n_outputs()];
        cluster.scores_into(local, self.n_features, x, &mut out)?;
        Ok(out)
    }

    pub fn predict(&self, task: usize, x: &[f64]) -> Result<f64> {
        Ok(decide(self.kind, &self.raw_scores(task, x)?))
    }

    pub fn predict_matrix(&self, task: usize, features: &Matrix) -> Result<Vec<f64>> {
        self.check_dim(features.cols())?;
        let (cluster, local) = self.route(task)?;
        let mut scores = vec![0.0; self.n_outputs()];
        features
            .iter_rows()
            .map(|x| {
                cluster.scores_into(local, self.n_features, x, &mut scores)?;
                Ok(decide(self.kind, &scores))
            })
            .collect()
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

    /// Writes `config.json`, `partition.csv`, `geometry/*.csv`, `dendrogram.json`
    /// and `clusters/<c>/model.json` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let header = SavedHeader {
            config: self.config,
            kind: self.kind,
            n_features: self.n_features,
            n_classes: self.n_classes,
            n_tasks: self.partition.assignment.len(),
            k: self.partition.k,
            mean_silhouette: self.partition.mean_silhouette,
        };
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(&header)?)?;

        let mut w = csv::Writer::from_path(dir.join("partition.csv"))?;
        w.write_record(["task", "cluster"])?;
        for (t, c) in self.partition.assignment.iter().enumerate() {
            w.write_record([t.to_string(), c.to_string()])?;
        }
        w.flush()?;

        if let Some(g) = &self.geometry {
            let gdir = dir.join("geometry");
            fs::create_dir_all(&gdir)?;
            write_matrix_csv(&g.errors, &gdir.join("errors.csv"))?;
            write_matrix_csv(&g.similarities, &gdir.join("similarities.csv"))?;
            write_matrix_csv(&g.distances, &gdir.join("distances.csv"))?;
            fs::write(
                gdir.join("source.json"),
                serde_json::to_string(&serde_json::json!({ "epsilon": g.epsilon, "source": g.source }))?,
            )?;
        }
        if let Some(d) = &self.dendrogram {
            fs::write(dir.join("dendrogram.json"), serde_json::to_string_pretty(d)?)?;
        }
        for (c, model) in self.clusters.iter().enumerate() {
            let cdir = dir.join("clusters").join(c.to_string());
            fs::create_dir_all(&cdir)?;
            fs::write(cdir.join("model.json"), serde_json::to_string(model)?)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header: SavedHeader = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
        let mut labels = vec![usize::MAX; header.n_tasks];
        let mut reader = csv::Reader::from_path(dir.join("partition.csv"))?;
        for (row, rec) in reader.deserialize::<(usize, usize)>().enumerate() {
            let (t, c) = rec?;
            *labels.get_mut(t).ok_or(Error::UnknownTask(t))? = c;
            if c >= header.k {
                return Err(Error::Parse {
                    path: dir.join("partition.csv"),
                    row: row + 2,
                    message: format!("cluster {c} out of range"),
                });
            }
        }
        if let Some(t) = labels.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidData(format!("partition.csv has no entry for task {t}")));
        }
        let mut partition = Partition::from_labels(&labels)?;
        if partition.assignment != labels {
            return Err(Error::InvalidData("partition labels are not in canonical order".into()));
        }
        partition.mean_silhouette = header.mean_silhouette;

        let clusters = (0..header.k)
            .map(|c| {
                let text = fs::read_to_string(dir.join("clusters").join(c.to_string()).join("model.json"))?;
                Ok(serde_json::from_str(&text)?)
            })
            .collect::<Result<Vec<ClusterModel>>>()?;
        let groups = partition.clusters();
        let mut local_index = vec![0; header.n_tasks];
        for (c, members) in groups.iter().enumerate() {
            if clusters[c].tasks() != members.as_slice() {
                return Err(Error::InvalidData(format!("cluster {c} model does not match partition.csv")));
            }
            for (pos, &t) in members.iter().enumerate() {
                local_index[t] = pos;
            }
        }

        let gdir = dir.join("geometry");
        let geometry = if gdir.join("distances.csv").exists() {
            #[derive(Deserialize)]
            struct Source {
                epsilon: f64,
                source: SimilaritySource,
            }
            let src: Source = serde_json::from_str(&fs::read_to_string(gdir.join("source.json"))?)?;
            Some(SimilarityGeometry {
                errors: read_matrix_csv(&gdir.join("errors.csv"))?,
                similarities: read_matrix_csv(&gdir.join("similarities.csv"))?,
                distances: read_matrix_csv(&gdir.join("distances.csv"))?,
                epsilon: src.epsilon,
                source: src.source,
            })
        } else {
            None
        };
        let dendrogram = match fs::read_to_string(dir.join("dendrogram.json")) {
            Ok(text) => Some(serde_json::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            config: header.config,
            kind: header.kind,
            n_features: header.n_features,
            n_classes: header.n_classes,
            partition,
            local_index,
            clusters,
            geometry,
            dendrogram,
        })
    }
}

impl TaskPredictor for RmbCleModel {
    fn n_tasks(&self) -> usize {
        self.partition.assignment.len()
    }

    fn predict_task(&self, task: usize, features: &Matrix) -> Result<Vec<f64>> {
        self.predict_matrix(task, features)
    }

    fn prediction_cost(&self, task: usize) -> Result<usize> {
        let (cluster, local) = self.route(task)?;
        Ok(cluster.n_stumps(local))
    }
}

fn fit_cluster(collection: &MultiTaskCollection, config: &RmbCleConfig, members: &[usize]) -> Result<ClusterModel> {
    match config.local {
        LocalEnsemble::Pooled { rounds } => {
            let tasks = members.iter().map(|&t| collection.task(t)).collect::<Result<Vec<_>>>()?;
            let (features, targets) = pool_with_indicators(&tasks, collection.n_features());
            let params = BoostParams::new(rounds).with_rate(config.learning_rate);
            let model = BoostedModel::fit(&features, &targets, collection.kind(), collection.n_classes(), params)?;
            Ok(ClusterModel::Pooled {
                tasks: members.to_vec(),
                model,
            })
        }
        LocalEnsemble::TwoBlockMtgb {
            shared_rounds,
            specific_rounds,
        } => {
            let sub = collection.subset(members)?;
            let model = MtgbModel::fit(&sub, shared_rounds, specific_rounds, config.learning_rate)?;
            Ok(ClusterModel::TwoBlockMtgb {
                tasks: members.to_vec(),
                model,
            })
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SavedHeader {
    config: RmbCleConfig,
    kind: ProblemKind,
    n_features: usize,
    n_classes: usize,
    n_tasks: usize,
    k: usize,
    mean_silhouette: f64,
}

/// Headerless CSV of a matrix, full `f64` precision.
pub fn write_matrix_csv(matrix: &Matrix, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in matrix.iter_rows() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_rows(&rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(id: usize, xs: &[f64], ys: &[f64]) -> TaskDataset {
        let x = Matrix::from_vec(xs.len(), 1, xs.to_vec()).unwrap();
        TaskDataset::new(id, x, ys.to_vec(), ProblemKind::Regression).unwrap()
    }

    fn four_tasks() -> MultiTaskCollection {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let up: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let down: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x).collect();
        MultiTaskCollection::new(vec![task(0, &xs, &up), task(1, &xs, &down), task(2, &xs, &up), task(3, &xs, &down)])
            .unwrap()
    }

    #[test]
    fn indicator_pooling_layout() {
        let a = task(0, &[1.0, 2.0], &[0.0, 1.0]);
        let b = task(1, &[3.0], &[2.0]);
        let (x, y) = pool_with_indicators(&[&a, &b], 1);
        assert_eq!(x.as_slice(), &[1.0, 1.0, 0.0, 2.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        assert_eq!(y, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn recovers_opposite_trends() {
        let coll = four_tasks();
        let model = RmbCleModel::train(&coll, &RmbCleConfig::pooled(30, 30)).unwrap();
        assert!(model.partition.same_grouping(&[0, 1, 0, 1]));
        assert_eq!(model.local_index, vec![0, 0, 1, 1]);
        assert!(model.predict(0, &[0.9]).unwrap() > model.predict(1, &[0.9]).unwrap());
        assert!(matches!(model.predict(4, &[0.9]), Err(Error::UnknownTask(4))));
        assert!(model.predict(0, &[0.9, 1.0]).is_err());
        assert_eq!(model.prediction_cost(2).unwrap(), 30);
    }

    #[test]
    fn single_task_collection_trains_one_cluster() {
        let coll = MultiTaskCollection::new(vec![task(0, &[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0])]).unwrap();
        let model = RmbCleModel::train(&coll, &RmbCleConfig::pooled(5, 5)).unwrap();
        assert_eq!(model.partition.k, 1);
        assert!(model.geometry.is_none());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let coll = four_tasks();
        let mut cfg = RmbCleConfig::pooled(10, 0);
        assert!(RmbCleModel::train(&coll, &cfg).is_err());
        cfg.local = LocalEnsemble::Pooled { rounds: 5 };
        cfg.k_max = Some(1);
        assert!(RmbCleModel::train(&coll, &cfg).is_err());
        assert!(RmbCleModel::train_with_partition(&coll, &RmbCleConfig::pooled(1, 1), &[0, 1]).is_err());
    }

    #[test]
    fn save_and_load_round_trip() {
        let coll = four_tasks();
        let model = RmbCleModel::train(&coll, &RmbCleConfig::two_block(20, 10, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        let loaded = RmbCleModel::load(dir.path()).unwrap();
        assert_eq!(loaded, model);
    }
}
