//! Repeated train/test benchmark: grid search, final fit, evaluation and reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rmb_cle::data::{self, SplitSpec};
use rmb_cle::synth::{generate, SyntheticSpec};
use rmb_cle::{rng, MultiTaskCollection, ProblemKind, TaskPredictor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::statistics::Statistics;

use crate::cv::{fit_selected, grid_search, Selection, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::methods::{FitContext, Grids, Method, RmbOptions};
use crate::metrics::{evaluate, higher_is_better, metric_names};
use crate::ranks::average_ranks;

/// Synthetic preset with optional overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub kind: ProblemKind,
    pub n_clusters: Option<usize>,
    pub tasks_per_cluster: Option<usize>,
    pub omega: Option<f64>,
    pub dim: Option<usize>,
    pub kappa: Option<usize>,
    pub tau: Option<f64>,
    pub length_scale: Option<f64>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub noise_std: Option<f64>,
}

impl SyntheticSource {
    pub fn preset(kind: ProblemKind) -> Self {
        Self {
            kind,
            n_clusters: None,
            tasks_per_cluster: None,
            omega: None,
            dim: None,
            kappa: None,
            tau: None,
            length_scale: None,
            n_train: None,
            n_test: None,
            noise_std: None,
        }
    }

    pub fn spec(&self, seed: u64) -> SyntheticSpec {
        let p = SyntheticSpec::preset(self.kind, seed);
        SyntheticSpec {
            n_clusters: self.n_clusters.unwrap_or(p.n_clusters),
            tasks_per_cluster: self.tasks_per_cluster.unwrap_or(p.tasks_per_cluster),
            omega: self.omega.unwrap_or(p.omega),
            dim: self.dim.unwrap_or(p.dim),
            kappa: self.kappa.unwrap_or(p.kappa),
            tau: self.tau.unwrap_or(p.tau),
            length_scale: self.length_scale.unwrap_or(p.length_scale),
            n_train: self.n_train.unwrap_or(p.n_train),
            n_test: self.n_test.unwrap_or(p.n_test),
            noise_std: self.noise_std.unwrap_or(p.noise_std),
            ..p
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    /// A collection directory or a CSV file in the standard schema.
    pub path: PathBuf,
    pub kind: Option<ProblemKind>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Optional `task,cluster` CSV enabling the cluster-known methods.
    pub truth: Option<PathBuf>,
}

fn default_train_fraction() -> f64 {
    SplitSpec::default().train_fraction
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    Synthetic(SyntheticSource),
    Csv(CsvSource),
}

fn default_repetitions() -> usize {
    1
}

fn default_learning_rate() -> f64 {
    rmb_cle::boost::DEFAULT_LEARNING_RATE
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

fn default_parallel() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub methods: Vec<Method>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub rmb: RmbOptions,
    /// Run repetitions concurrently. Timings are less clean when enabled.
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn synthetic(kind: ProblemKind, methods: Vec<Method>, repetitions: usize, seed: u64) -> Self {
        Self {
            seed,
            repetitions,
            methods,
            learning_rate: default_learning_rate(),
            folds: DEFAULT_FOLDS,
            dataset: DatasetSource::Synthetic(SyntheticSource::preset(kind)),
            grids: Grids::default(),
            rmb: RmbOptions::default(),
            parallel: true,
            output_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!("learning rate {} not in (0, 1]", self.learning_rate)));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        for &m in &self.methods {
            self.grids.get(m).points(m)?;
            if m.needs_truth() && matches!(&self.dataset, DatasetSource::Csv(c) if c.truth.is_none()) {
                return Err(Error::Config(format!("{m} needs a ground-truth partition for CSV data")));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> Option<ProblemKind> {
        match &self.dataset {
            DatasetSource::Synthetic(s) => Some(s.kind),
            DatasetSource::Csv(c) => c.kind,
        }
    }
}

/// Reads a `task,cluster` CSV into labels indexed by task.
pub fn read_partition_csv(path: &Path) -> Result<Vec<usize>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut pairs = Vec::new();
    for row in reader.deserialize() {
        let (task, cluster): (usize, usize) = row?;
        pairs.push((task, cluster));
    }
    pairs.sort_unstable();
    if pairs.iter().enumerate().any(|(i, &(t, _))| t != i) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "task ids must be 0..m-1, each once".into(),
        });
    }
    Ok(pairs.into_iter().map(|(_, c)| c).collect())
}

/// One repetition's data.
#[derive(Clone, Debug)]
pub struct Repetition {
    pub train: MultiTaskCollection,
    pub test: MultiTaskCollection,
    pub truth: Option<Vec<usize>>,
}

/// Prepares datasets; synthetic sources are regenerated per repetition,
/// CSV sources are re-split.
pub struct DataPlan {
    config: ExperimentConfig,
    base: Option<MultiTaskCollection>,
    truth: Option<Vec<usize>>,
}

impl DataPlan {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let (base, truth) = match &config.dataset {
            DatasetSource::Synthetic(_) => (None, None),
            DatasetSource::Csv(c) => {
                let coll = data::load_any(&c.path, c.kind)?;
                let truth = c.truth.as_deref().map(read_partition_csv).transpose()?;
                if truth.as_ref().is_some_and(|t| t.len() != coll.n_tasks()) {
                    return Err(Error::Config("ground truth does not cover every task".into()));
                }
                (Some(coll), truth)
            }
        };
        Ok(Self {
            config: config.clone(),
            base,
            truth,
        })
    }

    pub fn repetition(&self, r: usize) -> Result<Repetition> {
        let seed = self.config.seed;
        match (&self.config.dataset, &self.base) {
            (DatasetSource::Synthetic(s), _) => {
                let ds = generate(&s.spec(rng::derive_seed(seed, "repetition", r as u64)))?;
                let (train, test) = ds.train_test()?;
                Ok(Repetition {
                    train,
                    test,
                    truth: Some(ds.truth.assignment),
                })
            }
            (DatasetSource::Csv(c), Some(base)) => {
                let spec = SplitSpec {
                    train_fraction: c.train_fraction,
                    seed: rng::derive_seed(seed, "split", r as u64),
                };
                let (train, test) = data::split(base, spec)?;
                Ok(Repetition {
                    train,
                    test,
                    truth: self.truth.clone(),
                })
            }
            (DatasetSource::Csv(_), None) => unreachable!("CSV data is loaded up front"),
        }
    }
}

/// Wall-clock seconds of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub grid_search: f64,
    pub best_fit: f64,
    pub total_train: f64,
    pub predict: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub repetition: usize,
    pub selection: Option<Selection>,
    /// Task-averaged test metrics.
    pub metrics: BTreeMap<String, f64>,
    pub per_task: Vec<BTreeMap<String, f64>>,
    pub timings: Timings,
    pub partition: Option<Vec<usize>>,
    pub exact_recovery: Option<bool>,
    /// Stumps evaluated per prediction, averaged over tasks.
    pub prediction_cost: Option<f64>,
    /// SHA-256 of all test predictions, task by task.
    pub digest: Option<String>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation over repetitions; NaN for one repetition.
    pub std: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: ExperimentConfig,
    pub kind: ProblemKind,
    pub n_tasks: usize,
    /// Ground truth of each repetition, when known.
    pub truth: Vec<Option<Vec<usize>>>,
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
    /// Metric to (method, average rank over tasks), for methods with every repetition done.
    pub ranks: BTreeMap<String, Vec<(Method, f64)>>,
}

impl BenchmarkReport {
    pub fn all_ok(&self) -> bool {
        self.runs.iter().all(RunRecord::ok)
    }

    pub fn runs_of(&self, method: Method) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(move |r| r.method == method)
    }

    pub fn aggregate(&self, method: Method, metric: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method && a.metric == metric)
    }

    /// Same report with wall-clock fields zeroed, for determinism checks.
    pub fn without_timings(&self) -> BenchmarkReport {
        let mut out = self.clone();
        for run in &mut out.runs {
            run.timings = Timings::default();
        }
        out.aggregates.retain(|a| !a.metric.starts_with("time_"));
        out
    }
}

pub fn prediction_digest(predictions: &[Vec<f64>]) -> String {
    let mut h = Sha256::new();
    for task in predictions {
        h.update((task.len() as u64).to_le_bytes());
        for p in task {
            h.update(p.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Trains, evaluates and times one method on one repetition.
pub fn run_method(method: Method, config: &ExperimentConfig, rep: &Repetition, repetition: usize) -> RunRecord {
    let mut record = RunRecord {
        method,
        repetition,
        selection: None,
        metrics: BTreeMap::new(),
        per_task: Vec::new(),
        timings: Timings::default(),
        partition: None,
        exact_recovery: None,
        prediction_cost: None,
        digest: None,
        error: None,
    };
    if let Err(e) = fill_run(&mut record, config, rep) {
        record.error = Some(e.to_string());
    }
    record
}

fn fill_run(record: &mut RunRecord, config: &ExperimentConfig, rep: &Repetition) -> Result<()> {
    let method = record.method;
    let ctx = FitContext {
        learning_rate: config.learning_rate,
        rmb: config.rmb,
        truth: rep.truth.clone(),
    };
    let points = config.grids.get(method).points(method)?;
    let cv_seed = rng::derive_seed(config.seed, "cv", record.repetition as u64);

    let start = Instant::now();
    let search = grid_search(method, &ctx, &rep.train, &points, config.folds, cv_seed)?;
    record.timings.grid_search = start.elapsed().as_secs_f64();
    let fit_start = Instant::now();
    let model = fit_selected(method, &ctx, &rep.train, &search.selection)?;
    record.timings.best_fit = fit_start.elapsed().as_secs_f64();
    record.timings.total_train = start.elapsed().as_secs_f64();
    record.selection = Some(search.selection);

    let predict_start = Instant::now();
    let predictions = rep
        .test
        .tasks()
        .iter()
        .enumerate()
        .map(|(t, task)| model.predict_task(t, task.features()))
        .collect::<rmb_cle::Result<Vec<_>>>()?;
    record.timings.predict = predict_start.elapsed().as_secs_f64();

    let kind = rep.test.kind();
    record.per_task = rep
        .test
        .tasks()
        .iter()
        .zip(&predictions)
        .map(|(task, p)| evaluate(kind, p, task.targets(), rep.test.n_classes()))
        .collect::<Result<_>>()?;
    record.metrics = task_average(&record.per_task);
    let costs = (0..rep.test.n_tasks())
        .map(|t| model.prediction_cost(t))
        .collect::<rmb_cle::Result<Vec<_>>>()?;
    record.prediction_cost = Some(costs.iter().sum::<usize>() as f64 / costs.len() as f64);
    record.digest = Some(prediction_digest(&predictions));
    if let Some(p) = model.partition() {
        record.partition = Some(p.assignment.clone());
        record.exact_recovery = rep.truth.as_ref().map(|t| p.same_grouping(t));
    }
    Ok(())
}

/// Mean of each metric over tasks.
pub fn task_average(per_task: &[BTreeMap<String, f64>]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for task in per_task {
        for (k, v) in task {
            *sums.entry(k.clone()).or_default() += v;
        }
    }
    sums.into_iter().map(|(k, v)| (k, v / per_task.len() as f64)).collect()
}

/// Mean and sample standard deviation over repetitions of per-repetition
/// task means. `values[r][t]` is repetition `r`, task `t`.
pub fn aggregate_tasks_then_repetitions(values: &[Vec<f64>]) -> (f64, f64) {
    let per_rep: Vec<f64> = values.iter().map(|tasks| tasks.iter().mean()).collect();
    summarize(&per_rep)
}

/// Mean and sample standard deviation; the deviation is NaN below two values.
pub fn summarize(values: &[f64]) -> (f64, f64) {
    let std = if values.len() > 1 { values.iter().std_dev() } else { f64::NAN };
    (values.iter().mean(), std)
}

/// Scalar series aggregated per run, in addition to the test metrics.
fn run_scalars(run: &RunRecord) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = run.metrics.iter().map(|(k, v)| (k.clone(), *v)).collect();
    out.push(("time_grid_search".into(), run.timings.grid_search));
    out.push(("time_best_fit".into(), run.timings.best_fit));
    out.push(("time_total_train".into(), run.timings.total_train));
    out.push(("time_predict".into(), run.timings.predict));
    if let Some(c) = run.prediction_cost {
        out.push(("prediction_cost".into(), c));
    }
    if let Some(p) = &run.partition {
        out.push(("k".into(), p.iter().max().map_or(0.0, |k| (k + 1) as f64)));
    }
    if let Some(e) = run.exact_recovery {
        out.push(("exact_recovery".into(), f64::from(u8::from(e))));
    }
    out
}

fn aggregate_runs(config: &ExperimentConfig, runs: &[RunRecord]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &method in &config.methods {
        let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();
        for run in runs.iter().filter(|r| r.method == method && r.ok()) {
            for (name, v) in run_scalars(run) {
                if !series.contains_key(&name) {
                    order.push(name.clone());
                }
                series.entry(name).or_default().push(v);
            }
        }
        for name in order {
            let values = &series[&name];
            let (mean, std) = summarize(values);
            out.push(Aggregate {
                method,
                metric: name,
                mean,
                std,
                n: values.len(),
            });
        }
    }
    out
}

fn rank_runs(config: &ExperimentConfig, kind: ProblemKind, runs: &[RunRecord]) -> Result<BTreeMap<String, Vec<(Method, f64)>>> {
    let complete: Vec<Method> = config
        .methods
        .iter()
        .copied()
        .filter(|&m| runs.iter().filter(|r| r.method == m && r.ok()).count() == config.repetitions)
        .collect();
    let mut out = BTreeMap::new();
    if complete.len() < 2 {
        return Ok(out);
    }
    let names: Vec<String> = complete.iter().map(|m| m.to_string()).collect();
    for &metric in metric_names(kind) {
        // Each task's score is its mean over repetitions.
        let values: Vec<Vec<Option<f64>>> = complete
            .iter()
            .map(|&m| {
                let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.method == m).collect();
                let n_tasks = mine[0].per_task.len();
                (0..n_tasks)
                    .map(|t| {
                        let vals: Option<Vec<f64>> =
                            mine.iter().map(|r| r.per_task.get(t).and_then(|x| x.get(metric)).copied()).collect();
                        vals.map(|v| v.iter().mean())
                    })
                    .collect()
            })
            .collect();
        let ranks = average_ranks(&names, &values, higher_is_better(metric))?;
        out.insert(metric.to_string(), complete.iter().copied().zip(ranks).collect());
    }
    Ok(out)
}

/// Runs every method on every repetition. Per-run failures are recorded in
/// the report rather than aborting; configuration and data errors abort.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let plan = DataPlan::new(config)?;
    let one = |r: usize| -> Result<(Option<Vec<usize>>, MultiTaskCollection, Vec<RunRecord>)> {
        let rep = plan.repetition(r)?;
        let runs = config.methods.iter().map(|&m| run_method(m, config, &rep, r)).collect();
        Ok((rep.truth.clone(), rep.test, runs))
    };
    let results: Vec<_> = if config.parallel {
        (0..config.repetitions).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..config.repetitions).map(one).collect::<Result<_>>()?
    };
    let kind = results[0].1.kind();
    let n_tasks = results[0].1.n_tasks();
    let mut truth = Vec::new();
    let mut runs = Vec::new();
    for (t, _, r) in results {
        truth.push(t);
        runs.extend(r);
    }
    let aggregates = aggregate_runs(config, &runs);
    let ranks = rank_runs(config, kind, &runs)?;
    Ok(BenchmarkReport {
        config: config.clone(),
        kind,
        n_tasks,
        truth,
        runs,
        aggregates,
        ranks,
    })
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `runs.csv`, `per_task.csv`, `aggregate.csv`, `partitions.csv`,
/// `ranks.csv`, `truth.csv` (when known) and `report.json` under `dir`.
pub fn write_report(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let metrics = metric_names(report.kind);

    let mut w = csv::Writer::from_path(dir.join("runs.csv"))?;
    let mut header = vec!["method", "repetition", "status", "selection"];
    header.extend(metrics);
    header.extend([
        "grid_search_s",
        "best_fit_s",
        "total_train_s",
        "predict_s",
        "k",
        "exact_recovery",
        "prediction_cost",
        "digest",
        "error",
    ]);
    w.write_record(&header)?;
    for run in &report.runs {
        let mut row = vec![
            run.method.to_string(),
            run.repetition.to_string(),
            if run.ok() { "ok" } else { "error" }.to_string(),
            run.selection.as_ref().map(Selection::describe).unwrap_or_default(),
        ];
        row.extend(metrics.iter().map(|m| fmt_opt(run.metrics.get(*m))));
        let t = run.timings;
        row.extend([t.grid_search, t.best_fit, t.total_train, t.predict].map(|v| v.to_string()));
        row.push(fmt_opt(run.partition.as_ref().map(|p| p.iter().max().map_or(0, |k| k + 1))));
        row.push(fmt_opt(run.exact_recovery));
        row.push(fmt_opt(run.prediction_cost));
        row.push(run.digest.clone().unwrap_or_default());
        row.push(run.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("per_task.csv"))?;
    w.write_record(["method", "repetition", "task", "metric", "value"])?;
    for run in &report.runs {
        for (t, values) in run.per_task.iter().enumerate() {
            for (name, v) in values {
                w.write_record([run.method.to_string(), run.repetition.to_string(), t.to_string(), name.clone(), v.to_string()])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("aggregate.csv"))?;
    w.write_record(["method", "metric", "mean", "std", "n"])?;
    for a in &report.aggregates {
        w.write_record([a.method.to_string(), a.metric.clone(), a.mean.to_string(), a.std.to_string(), a.n.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("partitions.csv"))?;
    w.write_record(["method", "repetition", "task", "cluster"])?;
    for run in &report.runs {
        for (t, c) in run.partition.iter().flatten().enumerate() {
            w.write_record([run.method.to_string(), run.repetition.to_string(), t.to_string(), c.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("ranks.csv"))?;
    w.write_record(["metric", "method", "average_rank"])?;
    for (metric, ranks) in &report.ranks {
        for (m, r) in ranks {
            w.write_record([metric.clone(), m.to_string(), r.to_string()])?;
        }
    }
    w.flush()?;

    if let Some(Some(truth)) = report.truth.first() {
        let mut w = csv::Writer::from_path(dir.join("truth.csv"))?;
        w.write_record(["task", "cluster"])?;
        for (t, c) in truth.iter().enumerate() {
            w.write_record([t.to_string(), c.to_string()])?;
        }
        w.flush()?;
    }

    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregation_order_matters_on_fixture() {
        // Two repetitions of two tasks; the task means are equal, the task spread is not.
        let values = vec![vec![0.0, 1.0], vec![0.5, 0.5]];
        let (mean, std) = aggregate_tasks_then_repetitions(&values);
        assert_eq!(mean, 0.5);
        assert_eq!(std, 0.0);
        let flat: Vec<f64> = values.iter().flatten().copied().collect();
        assert!(summarize(&flat).1 > 0.4);
    }

    #[test]
    fn digest_is_sensitive_to_every_bit() {
        let a = prediction_digest(&[vec![1.0, 2.0], vec![3.0]]);
        assert_eq!(a.len(), 64);
        assert_ne!(a, prediction_digest(&[vec![1.0, 2.0 + f64::EPSILON * 2.0], vec![3.0]]));
        assert_ne!(a, prediction_digest(&[vec![1.0], vec![2.0, 3.0]]));
    }

    #[test]
    fn config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml(
            r#"
            methods = ["st", "rmb-cle-pooled"]
            repetitions = 3
            [dataset.synthetic]
            kind = "regression"
            n_train = 50
            [grids.st]
            s2 = [10, 20]
            "#,
        )
        .unwrap();
        assert_eq!(c.folds, 5);
        assert_eq!(c.grids.st.s2, vec![10, 20]);
        assert_eq!(c.grids.dp.s1, vec![20, 30, 50, 100]);
        let DatasetSource::Synthetic(s) = &c.dataset else { panic!() };
        assert_eq!(s.spec(1).n_train, 50);
        assert_eq!(s.spec(1).n_test, 1000);
        assert!(ExperimentConfig::from_toml("methods = []\n[dataset.synthetic]\nkind = \"regression\"").is_err());
        assert!(ExperimentConfig::from_toml("methods = [\"st\"]\nbogus = 1\n[dataset.synthetic]\nkind = \"regression\"").is_err());
    }
}
