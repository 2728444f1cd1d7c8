use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rmb_bench::benchmark::{read_partition_csv, run_benchmark, write_report, ExperimentConfig, SyntheticSource};
use rmb_bench::cv::{fit_selected, grid_search, Selection, DEFAULT_FOLDS};
use rmb_bench::methods::{BlockSizes, FitContext, Fitted, Grids, Method, RmbOptions};
use rmb_bench::metrics::{evaluate, higher_is_better};
use rmb_bench::ranks::average_ranks;
use rmb_bench::stability::stability_report;
use rmb_cle::baselines::BaselineModel;
use rmb_cle::clustering::{default_k_max, silhouette_scan};
use rmb_cle::data::{self, save_collection};
use rmb_cle::pipeline::{cluster_tasks, task_geometry};
use rmb_cle::synth::generate;
use rmb_cle::{Linkage, Matrix, MultiTaskCollection, ProblemKind, RmbCleConfig, RmbCleModel, SimilaritySource, TaskPredictor};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "bench-cli", version, about = "Clustered multi-task boosting: data, training and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic clustered multi-task dataset.
    Synth(SynthArgs),
    /// Fit one method and persist the model.
    Train(TrainArgs),
    /// Score a dataset with a persisted model.
    Predict(PredictArgs),
    /// Run the full benchmark protocol from a config file.
    Bench(BenchArgs),
    /// Export the error, similarity and distance matrices, dendrogram and partition.
    ClusterReport(ClusterReportArgs),
    /// Task-to-cluster assignment frequencies across benchmark repetitions.
    Stability(StabilityArgs),
    /// Average ranks of methods across tasks.
    Ranks(RanksArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Collection directory (data.csv + meta.json) or a CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Problem kind; required for a bare CSV file.
    #[arg(long)]
    kind: Option<ProblemKind>,
}

impl DataArgs {
    fn load(&self) -> Result<MultiTaskCollection> {
        data::load_any(&self.data, self.kind).with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    kind: ProblemKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives train/, test/ and truth.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_clusters: Option<usize>,
    #[arg(long)]
    tasks_per_cluster: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
}

#[derive(Args)]
struct BlockArgs {
    #[arg(long)]
    s1: Option<usize>,
    #[arg(long)]
    s2: Option<usize>,
    #[arg(long)]
    s4: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    method: Method,
    #[command(flatten)]
    blocks: BlockArgs,
    /// Choose block sizes by cross-validation over the default grid instead.
    #[arg(long)]
    tune: bool,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = rmb_cle::boost::DEFAULT_LEARNING_RATE)]
    learning_rate: f64,
    /// `task,cluster` CSV for the cluster-known methods.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    rmb: RmbArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RmbArgs {
    #[arg(long, value_enum, default_value = "average")]
    linkage: LinkageArg,
    #[arg(long, value_enum, default_value = "cross-task-error")]
    source: SourceArg,
    #[arg(long, default_value_t = rmb_cle::similarity::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long)]
    k_max: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum LinkageArg {
    Average,
    Complete,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SourceArg {
    CrossTaskError,
    PseudoResidual,
}

impl RmbArgs {
    fn options(&self) -> RmbOptions {
        RmbOptions {
            epsilon: self.epsilon,
            k_max: self.k_max,
            similarity_source: match self.source {
                SourceArg::CrossTaskError => SimilaritySource::CrossTaskError,
                SourceArg::PseudoResidual => SimilaritySource::PseudoResidual,
            },
            linkage: match self.linkage {
                LinkageArg::Average => Linkage::Average,
                LinkageArg::Complete => Linkage::Complete,
            },
        }
    }
}

#[derive(Args)]
struct PredictArgs {
    /// Directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Output CSV with columns task_id,row,prediction.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Run repetitions one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ClusterReportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 100)]
    per_task_rounds: usize,
    #[arg(long, default_value_t = rmb_cle::boost::DEFAULT_LEARNING_RATE)]
    learning_rate: f64,
    #[command(flatten)]
    rmb: RmbArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StabilityArgs {
    /// partitions.csv from a benchmark run.
    #[arg(long)]
    partitions: PathBuf,
    #[arg(long, default_value = "rmb-cle-pooled")]
    method: Method,
    /// `task,cluster` ground truth, e.g. truth.csv from a benchmark run.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Frequency matrix CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RanksArgs {
    /// per_task.csv from a benchmark run.
    #[arg(long)]
    per_task: PathBuf,
    #[arg(long)]
    metric: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Written next to every trained model.
#[derive(Serialize, Deserialize)]
struct ModelInfo {
    method: Method,
    selection: Selection,
    learning_rate: f64,
}

fn synth(args: SynthArgs) -> Result<()> {
    let source = SyntheticSource {
        n_clusters: args.n_clusters,
        tasks_per_cluster: args.tasks_per_cluster,
        omega: args.omega,
        n_train: args.n_train,
        n_test: args.n_test,
        noise_std: args.noise_std,
        ..SyntheticSource::preset(args.kind)
    };
    let ds = generate(&source.spec(args.seed))?;
    let (train, test) = ds.train_test()?;
    save_collection(&train, &args.out.join("train"), Some(ds.provenance()))?;
    save_collection(&test, &args.out.join("test"), Some(ds.provenance()))?;
    write_labels(&args.out.join("truth.csv"), &ds.truth.assignment)?;
    println!(
        "{} tasks ({} train / {} test rows each) written to {}",
        train.n_tasks(),
        ds.spec.n_train,
        ds.spec.n_test,
        args.out.display()
    );
    Ok(())
}

fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["task", "cluster"])?;
    for (t, c) in labels.iter().enumerate() {
        w.write_record([t.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn explicit_blocks(method: Method, b: &BlockArgs) -> Result<BlockSizes> {
    // Unset blocks fall back to the first value of the default grid.
    let first = Grids::default().get(method).points(method)?[0];
    Ok(BlockSizes {
        s1: b.s1.unwrap_or(first.s1),
        s2: b.s2.unwrap_or(first.s2),
        s4: b.s4.unwrap_or(first.s4),
    })
}

fn model_dir(out: &Path, fitted: &Fitted) -> PathBuf {
    match fitted {
        Fitted::RmbCle(_) => out.to_path_buf(),
        Fitted::Baseline(m) => {
            let kind = serde_json::to_value(m.kind()).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            out.join("baselines").join(kind)
        }
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let collection = args.data.load()?;
    let ctx = FitContext {
        learning_rate: args.learning_rate,
        rmb: args.rmb.options(),
        truth: args.truth.as_deref().map(read_partition_csv).transpose()?,
    };
    let selection = if args.tune {
        let points = Grids::default().get(args.method).points(args.method)?;
        let outcome = grid_search(args.method, &ctx, &collection, &points, args.folds, args.seed)?;
        for (b, score) in &outcome.trace {
            println!("cv {b}: {score:.6}");
        }
        outcome.selection
    } else {
        let b = explicit_blocks(args.method, &args.blocks)?;
        match args.method {
            Method::St => Selection::PerTask(vec![b; collection.n_tasks()]),
            _ => Selection::Shared(b),
        }
    };
    let fitted = fit_selected(args.method, &ctx, &collection, &selection)?;
    let dir = model_dir(&args.out, &fitted);
    fs::create_dir_all(&dir)?;
    match &fitted {
        Fitted::RmbCle(model) | Fitted::Baseline(BaselineModel::ClusterKnown { model }) => model.save(&dir)?,
        Fitted::Baseline(model) => fs::write(dir.join("model.json"), serde_json::to_string(model)?)?,
    }
    let info = ModelInfo {
        method: args.method,
        selection,
        learning_rate: args.learning_rate,
    };
    fs::write(args.out.join("method.json"), serde_json::to_string_pretty(&info)?)?;
    if let Some(p) = fitted.partition() {
        println!("partition: k = {}, mean silhouette {:.4}", p.k, p.mean_silhouette);
    }
    println!("{} ({}) saved to {}", args.method, info.selection.describe(), dir.display());
    Ok(())
}

fn load_model(dir: &Path) -> Result<(ModelInfo, Fitted)> {
    let info: ModelInfo = serde_json::from_str(&fs::read_to_string(dir.join("method.json")).context("reading method.json")?)?;
    let fitted = match info.method {
        Method::RmbClePooled | Method::RmbCleMtgb => Fitted::RmbCle(RmbCleModel::load(dir)?),
        Method::CkPooled | Method::CkMtgb => Fitted::Baseline(BaselineModel::ClusterKnown {
            model: RmbCleModel::load(&dir.join("baselines").join("cluster-known"))?,
        }),
        _ => {
            let mut found = None;
            for entry in fs::read_dir(dir.join("baselines"))? {
                let path = entry?.path().join("model.json");
                if path.exists() {
                    found = Some(serde_json::from_str::<BaselineModel>(&fs::read_to_string(path)?)?);
                }
            }
            Fitted::Baseline(found.context("no baseline model.json found")?)
        }
    };
    Ok((info, fitted))
}

fn predict(args: PredictArgs) -> Result<()> {
    let (info, model) = load_model(&args.model)?;
    let collection = args.data.load()?;
    if collection.n_tasks() != model.n_tasks() {
        bail!("model has {} tasks, data has {}", model.n_tasks(), collection.n_tasks());
    }
    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record(["task_id", "row", "prediction"])?;
    let mut per_task = Vec::new();
    for (t, task) in collection.tasks().iter().enumerate() {
        let p = model.predict_task(t, task.features())?;
        for (row, v) in p.iter().enumerate() {
            w.write_record([t.to_string(), row.to_string(), v.to_string()])?;
        }
        per_task.push(evaluate(collection.kind(), &p, task.targets(), collection.n_classes())?);
    }
    w.flush()?;
    println!("{} predictions written to {}", info.method, args.out.display());
    for (name, value) in rmb_bench::benchmark::task_average(&per_task) {
        println!("{name}: {value:.6}");
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let mut config = ExperimentConfig::load(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(r) = args.repetitions {
        config.repetitions = r;
    }
    if let Some(m) = args.methods {
        config.methods = m;
    }
    if let Some(f) = args.folds {
        config.folds = f;
    }
    if let Some(lr) = args.learning_rate {
        config.learning_rate = lr;
    }
    if args.output_dir.is_some() {
        config.output_dir = args.output_dir;
    }
    if args.sequential {
        config.parallel = false;
    }
    let out = config.output_dir.clone().context("no output directory (set output_dir or --output-dir)")?;
    let report = run_benchmark(&config)?;
    write_report(&report, &out)?;
    for a in report.aggregates.iter().filter(|a| !a.metric.starts_with("time_grid") && a.metric != "absent_classes") {
        println!("{:<16} {:<18} {:>12.6} ± {:<10.6} (n={})", a.method.to_string(), a.metric, a.mean, a.std, a.n);
    }
    for run in report.runs.iter().filter(|r| !r.ok()) {
        eprintln!("{} repetition {}: {}", run.method, run.repetition, run.error.as_deref().unwrap_or(""));
    }
    println!("report written to {}", out.display());
    Ok(if report.all_ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

/// m x m matrix with a header row and a leading column of task ids.
fn write_labeled_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["task".to_string()];
    header.extend((0..m.cols()).map(|j| j.to_string()));
    w.write_record(&header)?;
    for i in 0..m.rows() {
        let mut row = vec![i.to_string()];
        row.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn cluster_report(args: ClusterReportArgs) -> Result<()> {
    let collection = args.data.load()?;
    if collection.n_tasks() < 2 {
        bail!("clustering needs at least two tasks");
    }
    let o = args.rmb.options();
    let config = RmbCleConfig {
        per_task_rounds: args.per_task_rounds,
        learning_rate: args.learning_rate,
        epsilon: o.epsilon,
        k_max: o.k_max,
        similarity_source: o.similarity_source,
        linkage: o.linkage,
        ..RmbCleConfig::default()
    };
    config.validate()?;
    let geometry = task_geometry(&collection, &config)?;
    let (dendrogram, partition) = cluster_tasks(&geometry, &config)?;
    fs::create_dir_all(&args.out)?;
    write_labeled_matrix(&args.out.join("errors.csv"), &geometry.errors)?;
    write_labeled_matrix(&args.out.join("similarities.csv"), &geometry.similarities)?;
    write_labeled_matrix(&args.out.join("distances.csv"), &geometry.distances)?;
    fs::write(args.out.join("dendrogram.json"), serde_json::to_string_pretty(&dendrogram)?)?;
    write_labels(&args.out.join("partition.csv"), &partition.assignment)?;
    let k_max = config.k_max.unwrap_or_else(|| default_k_max(collection.n_tasks()));
    let mut w = csv::Writer::from_path(args.out.join("silhouette.csv"))?;
    w.write_record(["k", "mean_silhouette"])?;
    for (k, s) in silhouette_scan(&dendrogram, &geometry.distances, k_max)? {
        w.write_record([k.to_string(), s.to_string()])?;
    }
    w.flush()?;
    println!("k = {}, mean silhouette {:.4}", partition.k, partition.mean_silhouette);
    for (c, members) in partition.clusters().iter().enumerate() {
        println!("cluster {c}: {members:?}");
    }
    Ok(())
}

fn stability(args: StabilityArgs) -> Result<()> {
    let mut reader = csv::Reader::from_path(&args.partitions)?;
    let mut runs: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for row in reader.deserialize() {
        let (method, rep, task, cluster): (String, usize, usize, usize) = row?;
        if method == args.method.name() {
            runs.entry(rep).or_default().push((task, cluster));
        }
    }
    if runs.is_empty() {
        bail!("no partitions for {} in {}", args.method, args.partitions.display());
    }
    let runs: Vec<Vec<usize>> = runs
        .into_values()
        .map(|mut pairs| {
            pairs.sort_unstable();
            pairs.into_iter().map(|(_, c)| c).collect()
        })
        .collect();
    let truth = args.truth.as_deref().map(read_partition_csv).transpose()?;
    let report = stability_report(&runs, truth.as_deref())?;
    let width = report.frequencies.first().map_or(0, Vec::len);
    let mut rows = Vec::new();
    let mut header = vec!["task".to_string()];
    header.extend((0..width).map(|c| format!("cluster_{c}")));
    rows.push(header);
    for (t, f) in report.frequencies.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(f.iter().map(|v| format!("{v:.4}")));
        rows.push(row);
    }
    match &args.out {
        Some(path) => {
            let mut w = csv::Writer::from_path(path)?;
            for row in &rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        None => rows.iter().for_each(|r| println!("{}", r.join(","))),
    }
    println!("runs: {}", report.n_runs);
    if let Some(rate) = report.exact_recovery {
        println!("exact recovery: {rate:.4}");
    }
    Ok(())
}

fn ranks(args: RanksArgs) -> Result<()> {
    let mut reader = csv::Reader::from_path(&args.per_task)?;
    // (method, task) -> values over repetitions
    let mut cells: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for row in reader.deserialize() {
        let (method, _rep, task, metric, value): (String, usize, usize, String, f64) = row?;
        if metric == args.metric {
            cells.entry(method).or_default().entry(task).or_default().push(value);
        }
    }
    if cells.is_empty() {
        bail!("metric `{}` not found in {}", args.metric, args.per_task.display());
    }
    let n_tasks = cells.values().flat_map(|t| t.keys()).max().map_or(0, |t| t + 1);
    let methods: Vec<String> = cells.keys().cloned().collect();
    let values: Vec<Vec<Option<f64>>> = cells
        .values()
        .map(|tasks| {
            (0..n_tasks)
                .map(|t| tasks.get(&t).map(|v| v.iter().sum::<f64>() / v.len() as f64))
                .collect()
        })
        .collect();
    let ranks = average_ranks(&methods, &values, higher_is_better(&args.metric))?;
    let mut order: Vec<usize> = (0..methods.len()).collect();
    order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "average_rank"])?;
    for i in order {
        w.write_record([methods[i].clone(), format!("{:.4}", ranks[i])])?;
    }
    let text = String::from_utf8(w.into_inner()?)?;
    match &args.out {
        Some(path) => fs::write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Synth(a) => synth(a)?,
        Command::Train(a) => train(a)?,
        Command::Predict(a) => predict(a)?,
        Command::Bench(a) => return bench(a),
        Command::ClusterReport(a) => cluster_report(a)?,
        Command::Stability(a) => stability(a)?,
        Command::Ranks(a) => ranks(a)?,
    }
    Ok(ExitCode::SUCCESS)
}
