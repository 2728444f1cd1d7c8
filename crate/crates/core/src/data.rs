//! Task-indexed tabular datasets, train/test splitting and CSV persistence.
//!
//! A collection on disk is a directory holding `data.csv` (header
//! `task_id,f0,..,f{d-1},target`) and `meta.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Regression,
    Classification,
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProblemKind::Regression => f.write_str("regression"),
            ProblemKind::Classification => f.write_str("classification"),
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regression" | "reg" => Ok(ProblemKind::Regression),
            "classification" | "clf" => Ok(ProblemKind::Classification),
            other => Err(Error::InvalidConfig(format!("unknown problem kind `{other}`"))),
        }
    }
}

/// Labeled samples of one task. Classification targets are stored as
/// integral class indices in `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    task_id: usize,
    features: Matrix,
    targets: Vec<f64>,
    kind: ProblemKind,
}

impl TaskDataset {
    pub fn new(task_id: usize, features: Matrix, targets: Vec<f64>, kind: ProblemKind) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(Error::InvalidData(format!(
                "task {task_id}: {} feature rows but {} targets",
                features.rows(),
                targets.len()
            )));
        }
        if targets.is_empty() {
            return Err(Error::InvalidData(format!("task {task_id} has zero rows")));
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "task {task_id}: non-finite feature at row {}",
                pos / features.cols().max(1)
            )));
        }
        for (v, &t) in targets.iter().enumerate() {
            let ok = match kind {
                ProblemKind::Regression => t.is_finite(),
                ProblemKind::Classification => t >= 0.0 && t.fract() == 0.0 && t < u32::MAX as f64,
            };
            if !ok {
                return Err(Error::InvalidData(format!(
                    "task {task_id}: invalid {kind} target {t} at row {v}"
                )));
            }
        }
        Ok(Self {
            task_id,
            features,
            targets,
            kind,
        })
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Class labels; meaningful for classification tasks only.
    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.iter().map(|&t| t as usize)
    }

    pub fn select(&self, rows: &[usize]) -> TaskDataset {
        TaskDataset {
            task_id: self.task_id,
            features: self.features.select_rows(rows),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            kind: self.kind,
        }
    }

    /// Same data under a different task id.
    pub fn with_task_id(mut self, task_id: usize) -> TaskDataset {
        self.task_id = task_id;
        self
    }

    /// Replaces the targets, re-validating them against the problem kind.
    pub fn with_targets(self, targets: Vec<f64>) -> Result<TaskDataset> {
        TaskDataset::new(self.task_id, self.features, targets, self.kind)
    }
}

/// All tasks of one multi-task problem. Task ids are `0..m` in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiTaskCollection {
    tasks: Vec<TaskDataset>,
    n_features: usize,
    kind: ProblemKind,
    /// Size of the shared label space; 0 for regression.
    n_classes: usize,
}

impl MultiTaskCollection {
    /// Validates the tasks and infers the class count as `1 + max label`.
    pub fn new(tasks: Vec<TaskDataset>) -> Result<Self> {
        let first = tasks.first().ok_or(Error::Empty("collection has no tasks"))?;
        let kind = first.kind();
        let n_classes = match kind {
            ProblemKind::Regression => 0,
            ProblemKind::Classification => {
                let max = tasks
                    .iter()
                    .flat_map(|t| t.labels())
                    .max()
                    .unwrap_or(0);
                max + 1
            }
        };
        Self::with_classes(tasks, n_classes)
    }

    /// Like [`MultiTaskCollection::new`] but with an explicit label space,
    /// which may be larger than the labels present.
    pub fn with_classes(tasks: Vec<TaskDataset>, n_classes: usize) -> Result<Self> {
        let first = tasks.first().ok_or(Error::Empty("collection has no tasks"))?;
        let n_features = first.n_features();
        let kind = first.kind();
        for (i, t) in tasks.iter().enumerate() {
            if t.task_id() != i {
                return Err(Error::InvalidData(format!(
                    "task ids must be contiguous from 0: position {i} holds task {}",
                    t.task_id()
                )));
            }
            if t.n_features() != n_features {
                return Err(Error::InvalidData(format!(
                    "task {i} has {} features, task 0 has {n_features}",
                    t.n_features()
                )));
            }
            if t.kind() != kind {
                return Err(Error::InvalidData(format!("task {i} mixes problem kinds")));
            }
        }
        let n_classes = match kind {
            ProblemKind::Regression => 0,
            ProblemKind::Classification => {
                if n_classes < 2 {
                    return Err(Error::InvalidData(format!(
                        "classification needs at least 2 classes, inferred {n_classes}"
                    )));
                }
                if let Some(t) = tasks.iter().find(|t| t.labels().any(|l| l >= n_classes)) {
                    return Err(Error::InvalidData(format!(
                        "task {} has labels outside 0..{n_classes}",
                        t.task_id()
                    )));
                }
                n_classes
            }
        };
        Ok(Self {
            tasks,
            n_features,
            kind,
            n_classes,
        })
    }

    pub fn tasks(&self) -> &[TaskDataset] {
        &self.tasks
    }

    pub fn task(&self, id: usize) -> Result<&TaskDataset> {
        self.tasks.get(id).ok_or(Error::UnknownTask(id))
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_samples(&self) -> usize {
        self.tasks.iter().map(TaskDataset::n_samples).sum()
    }

    /// Sub-collection of the given tasks, renumbered `0..ids.len()` in order.
    pub fn subset(&self, ids: &[usize]) -> Result<MultiTaskCollection> {
        let tasks = ids
            .iter()
            .enumerate()
            .map(|(new_id, &id)| Ok(self.task(id)?.clone().with_task_id(new_id)))
            .collect::<Result<Vec<_>>>()?;
        MultiTaskCollection::with_classes(tasks, self.n_classes)
    }

    /// Replaces task `id`, keeping the label space.
    pub fn replace_task(&self, id: usize, task: TaskDataset) -> Result<MultiTaskCollection> {
        let mut tasks = self.tasks.clone();
        *tasks.get_mut(id).ok_or(Error::UnknownTask(id))? = task.with_task_id(id);
        MultiTaskCollection::with_classes(tasks, self.n_classes)
    }

    pub fn into_tasks(self) -> Vec<TaskDataset> {
        self.tasks
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Number of training rows for a task of `n` samples: `floor(fraction * n)`
/// clamped to leave at least one row on each side.
pub fn train_size(n: usize, fraction: f64) -> usize {
    let raw = (fraction * n as f64).floor() as usize;
    raw.clamp(1, n.saturating_sub(1))
}

/// Splits every task independently with its own seeded permutation.
/// Rows keep their original relative order on each side.
pub fn split(collection: &MultiTaskCollection, spec: SplitSpec) -> Result<(MultiTaskCollection, MultiTaskCollection)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {} not in (0, 1)",
            spec.train_fraction
        )));
    }
    let mut train = Vec::with_capacity(collection.n_tasks());
    let mut test = Vec::with_capacity(collection.n_tasks());
    for task in collection.tasks() {
        let n = task.n_samples();
        if n < 2 {
            return Err(Error::TaskTooSmall {
                task: task.task_id(),
                n_samples: n,
                required: 2,
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(spec.seed, "split", task.task_id() as u64));
        let cut = train_size(n, spec.train_fraction);
        let (mut tr, mut te) = (order[..cut].to_vec(), order[cut..].to_vec());
        tr.sort_unstable();
        te.sort_unstable();
        train.push(task.select(&tr));
        test.push(task.select(&te));
    }
    Ok((
        MultiTaskCollection::with_classes(train, collection.n_classes())?,
        MultiTaskCollection::with_classes(test, collection.n_classes())?,
    ))
}

/// Column mapping for CSV ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub task_column: String,
    pub target_column: String,
    /// Feature columns in order; `None` takes every other column in file order.
    pub feature_columns: Option<Vec<String>>,
    pub kind: ProblemKind,
}

impl CsvSchema {
    pub fn standard(kind: ProblemKind) -> Self {
        Self {
            task_column: "task_id".into(),
            target_column: "target".into(),
            feature_columns: None,
            kind,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectionMeta {
    pub problem_kind: ProblemKind,
    pub n_features: usize,
    pub n_tasks: usize,
    pub n_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        row: 1,
        message: format!("missing column `{name}`"),
    })
}

/// Reads a CSV file into a collection, one task per distinct task id.
pub fn load_collection(path: &Path, schema: &CsvSchema) -> Result<MultiTaskCollection> {
    load_collection_with_classes(path, schema, None)
}

/// As [`load_collection`], optionally fixing the class count instead of inferring it.
pub fn load_collection_with_classes(
    path: &Path,
    schema: &CsvSchema,
    n_classes: Option<usize>,
) -> Result<MultiTaskCollection> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let task_col = column_index(&headers, &schema.task_column, path)?;
    let target_col = column_index(&headers, &schema.target_column, path)?;
    let feature_cols: Vec<usize> = match &schema.feature_columns {
        Some(names) => names
            .iter()
            .map(|n| column_index(&headers, n, path))
            .collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&c| c != task_col && c != target_col)
            .collect(),
    };
    let d = feature_cols.len();

    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };

    let mut grouped: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let cell = |c: usize| record.get(c).unwrap_or("").trim();
        let task: usize = cell(task_col)
            .parse()
            .map_err(|_| parse_err(row, format!("task id `{}` is not a non-negative integer", cell(task_col))))?;
        let entry = grouped.entry(task).or_default();
        for &c in &feature_cols {
            let v: f64 = cell(c).parse().map_err(|_| {
                parse_err(row, format!("feature `{}` = `{}` is not numeric", &headers[c], cell(c)))
            })?;
            if !v.is_finite() {
                return Err(parse_err(row, format!("feature `{}` is not finite", &headers[c])));
            }
            entry.0.push(v);
        }
        let target: f64 = cell(target_col)
            .parse()
            .map_err(|_| parse_err(row, format!("target `{}` is not numeric", cell(target_col))))?;
        if schema.kind == ProblemKind::Classification && (target < 0.0 || target.fract() != 0.0) {
            return Err(parse_err(row, format!("class label `{target}` is not a non-negative integer")));
        }
        entry.1.push(target);
    }

    let m = grouped.keys().next_back().map_or(0, |&k| k + 1);
    if m == 0 {
        return Err(parse_err(1, "no data rows".into()));
    }
    let mut tasks = Vec::with_capacity(m);
    for id in 0..m {
        let (features, targets) = grouped
            .remove(&id)
            .ok_or_else(|| parse_err(1, format!("task {id} has zero rows")))?;
        let n = targets.len();
        tasks.push(TaskDataset::new(id, Matrix::from_vec(n, d, features)?, targets, schema.kind)?);
    }
    match n_classes {
        Some(q) => MultiTaskCollection::with_classes(tasks, q),
        None => MultiTaskCollection::new(tasks),
    }
    .map_err(|e| match e {
        Error::InvalidData(msg) => parse_err(1, format!("inconsistent class labels: {msg}")),
        other => other,
    })
}

/// Writes `task_id,f0..f{d-1},target` rows. Values use the shortest
/// representation that parses back to the identical `f64`.
pub fn write_csv(collection: &MultiTaskCollection, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["task_id".to_string()];
    header.extend((0..collection.n_features()).map(|j| format!("f{j}")));
    header.push("target".into());
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for task in collection.tasks() {
        for (row, &y) in task.features().iter_rows().zip(task.targets()) {
            record.clear();
            record.push(task.task_id().to_string());
            record.extend(row.iter().map(|v| v.to_string()));
            record.push(y.to_string());
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Persists a collection as `dir/data.csv` + `dir/meta.json`.
pub fn save_collection(
    collection: &MultiTaskCollection,
    dir: &Path,
    provenance: Option<serde_json::Value>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(collection, &dir.join("data.csv"))?;
    let meta = CollectionMeta {
        problem_kind: collection.kind(),
        n_features: collection.n_features(),
        n_tasks: collection.n_tasks(),
        n_classes: collection.n_classes(),
        provenance,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<CollectionMeta> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?)
}

/// Loads a directory written by [`save_collection`].
pub fn load_collection_dir(dir: &Path) -> Result<(MultiTaskCollection, CollectionMeta)> {
    let meta = read_meta(dir)?;
    let schema = CsvSchema::standard(meta.problem_kind);
    let n_classes = (meta.problem_kind == ProblemKind::Classification).then_some(meta.n_classes);
    let collection = load_collection_with_classes(&dir.join("data.csv"), &schema, n_classes)?;
    if collection.n_tasks() != meta.n_tasks || collection.n_features() != meta.n_features {
        return Err(Error::InvalidData(format!(
            "{}: data.csv disagrees with meta.json",
            dir.display()
        )));
    }
    Ok((collection, meta))
}

/// Accepts either a collection directory or a bare CSV file in the standard schema.
pub fn load_any(path: &Path, kind: Option<ProblemKind>) -> Result<MultiTaskCollection> {
    if path.is_dir() {
        return Ok(load_collection_dir(path)?.0);
    }
    let kind = kind.ok_or_else(|| {
        Error::InvalidConfig(format!("{}: problem kind required for a bare CSV", path.display()))
    })?;
    load_collection(path, &CsvSchema::standard(kind))
}

pub fn data_path(dir: &Path) -> PathBuf {
    dir.join("data.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(id: usize, rows: &[[f64; 2]], targets: &[f64], kind: ProblemKind) -> TaskDataset {
        TaskDataset::new(id, Matrix::from_rows(rows, 2).unwrap(), targets.to_vec(), kind).unwrap()
    }

    fn write(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("in.csv");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn csv_rows_group_by_task() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "task_id,f0,target\n0,1.0,2.0\n0,2.0,3.0\n1,5.0,1.5\n");
        let c = load_collection(&p, &CsvSchema::standard(ProblemKind::Regression)).unwrap();
        assert_eq!(c.n_tasks(), 2);
        assert_eq!(c.tasks()[0].n_samples(), 2);
        assert_eq!(c.tasks()[1].n_samples(), 1);
        assert_eq!(c.tasks()[0].targets(), &[2.0, 3.0]);
    }

    #[test]
    fn non_numeric_feature_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "task_id,f0,target\n0,1.0,2.0\n0,abc,3.0\n");
        let err = load_collection(&p, &CsvSchema::standard(ProblemKind::Regression)).unwrap_err();
        match err {
            Error::Parse { row, message, .. } => {
                assert_eq!(row, 3);
                assert!(message.contains("abc"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_empty_task_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "task,f0,target\n0,1.0,2.0\n");
        assert!(load_collection(&p, &CsvSchema::standard(ProblemKind::Regression)).is_err());
        let p = write(dir.path(), "task_id,f0,target\n0,1.0,2.0\n2,1.0,2.0\n");
        let err = load_collection(&p, &CsvSchema::standard(ProblemKind::Regression)).unwrap_err();
        assert!(err.to_string().contains("task 1 has zero rows"), "{err}");
    }

    #[test]
    fn single_class_is_inconsistent() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "task_id,f0,target\n0,1.0,0\n1,1.0,0\n");
        let err = load_collection(&p, &CsvSchema::standard(ProblemKind::Classification)).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn class_count_spans_the_whole_collection() {
        let c = MultiTaskCollection::new(vec![
            task(0, &[[0.0, 0.0]], &[0.0], ProblemKind::Classification),
            task(1, &[[0.0, 0.0], [1.0, 1.0]], &[2.0, 1.0], ProblemKind::Classification),
        ])
        .unwrap();
        assert_eq!(c.n_classes(), 3);
    }

    #[test]
    fn split_sizes_follow_floor_with_clamping() {
        assert_eq!(train_size(10, 0.8), 8);
        assert_eq!(train_size(5, 0.9), 4);
        assert_eq!(train_size(2, 0.1), 1);
        assert_eq!(train_size(2, 0.99), 1);

        let rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 0.0]).collect();
        let targets: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let c = MultiTaskCollection::new(vec![task(0, &rows, &targets, ProblemKind::Regression)]).unwrap();
        let spec = SplitSpec { train_fraction: 0.8, seed: 3 };
        let (tr, te) = split(&c, spec).unwrap();
        assert_eq!(tr.tasks()[0].n_samples(), 8);
        assert_eq!(te.tasks()[0].n_samples(), 2);
        let again = split(&c, spec).unwrap();
        assert_eq!(tr, again.0);
        assert_eq!(te, again.1);
    }

    #[test]
    fn split_rejects_single_sample_task() {
        let c = MultiTaskCollection::new(vec![task(0, &[[0.0, 0.0]], &[1.0], ProblemKind::Regression)]).unwrap();
        let err = split(&c, SplitSpec::default()).unwrap_err();
        assert!(matches!(err, Error::TaskTooSmall { task: 0, .. }));
    }
}
