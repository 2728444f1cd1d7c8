use std::collections::BTreeMap;
use std::path::Path;

use rmb_bench::benchmark::{run_benchmark, summarize, write_report, ExperimentConfig, SyntheticSource};
use rmb_bench::cv::{grid_search, make_folds, Selection};
use rmb_bench::metrics::selection_score;
use rmb_bench::{BlockSizes, FitContext, Method};
use rmb_cle::synth::generate;
use rmb_cle::{ProblemKind, RmbCleModel, TaskPredictor};

fn smoke(kind: ProblemKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::synthetic(kind, vec![Method::St, Method::Dp, Method::RmbClePooled, Method::CkPooled], 2, 7);
    if let rmb_bench::benchmark::DatasetSource::Synthetic(s) = &mut c.dataset {
        s.n_clusters = Some(2);
        s.tasks_per_cluster = Some(3);
        s.n_train = Some(50);
        s.n_test = Some(30);
    }
    c.grids.st.s2 = vec![10, 30];
    c.grids.dp.s1 = vec![10, 30];
    c.grids.rmb_cle_pooled.s2 = vec![10, 20];
    c.grids.rmb_cle_pooled.s4 = vec![30];
    c.grids.ck_pooled.s4 = vec![30];
    c
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| headers.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

#[test]
fn smoke_run_emits_every_file() {
    let report = run_benchmark(&smoke(ProblemKind::Classification)).unwrap();
    assert!(report.all_ok(), "{:?}", report.runs.iter().filter_map(|r| r.error.clone()).collect::<Vec<_>>());
    let dir = tempfile::tempdir().unwrap();
    write_report(&report, dir.path()).unwrap();
    for f in ["runs.csv", "per_task.csv", "aggregate.csv", "partitions.csv", "ranks.csv", "truth.csv", "report.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    assert_eq!(read_csv(&dir.path().join("runs.csv")).len(), 8);
    assert_eq!(report.ranks["accuracy"].len(), 4);
    let back: rmb_bench::BenchmarkReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(back.runs.len(), report.runs.len());
}

#[test]
fn aggregate_table_is_recomputable_from_raw_runs() {
    let report = run_benchmark(&smoke(ProblemKind::Regression)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_report(&report, dir.path()).unwrap();
    let runs = read_csv(&dir.path().join("runs.csv"));
    let per_task = read_csv(&dir.path().join("per_task.csv"));
    let aggregate = read_csv(&dir.path().join("aggregate.csv"));
    fn column(metric: &str) -> &str {
        match metric {
            "time_grid_search" => "grid_search_s",
            "time_best_fit" => "best_fit_s",
            "time_total_train" => "total_train_s",
            "time_predict" => "predict_s",
            other => other,
        }
    }
    let mut audited = 0;
    for row in &aggregate {
        let metric = row["metric"].as_str();
        let values: Vec<f64> = runs
            .iter()
            .filter(|r| r["method"] == row["method"] && r["status"] == "ok")
            .map(|r| match column(metric) {
                "exact_recovery" => f64::from(u8::from(r["exact_recovery"] == "true")),
                c => r[c].parse().unwrap(),
            })
            .collect();
        let (mean, std) = summarize(&values);
        let close = |a: f64, b: &str| (a - b.parse::<f64>().unwrap()).abs() <= 1e-12 * (1.0 + a.abs());
        assert!(close(mean, &row["mean"]), "{row:?}");
        assert!(close(std, &row["std"]), "{row:?}");
        audited += 1;
    }
    assert!(audited >= 20);
    // Each run's task-averaged metric is the mean of its per-task rows.
    for run in &runs {
        let tasks: Vec<f64> = per_task
            .iter()
            .filter(|p| p["method"] == run["method"] && p["repetition"] == run["repetition"] && p["metric"] == "rmse")
            .map(|p| p["value"].parse().unwrap())
            .collect();
        assert_eq!(tasks.len(), 6);
        let mean = tasks.iter().sum::<f64>() / 6.0;
        assert!((mean - run["rmse"].parse::<f64>().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn equal_configs_give_equal_reports() {
    let config = smoke(ProblemKind::Classification);
    let a = run_benchmark(&config).unwrap();
    let b = run_benchmark(&ExperimentConfig { parallel: false, ..config.clone() }).unwrap();
    let strip = |r: &rmb_bench::BenchmarkReport| {
        let mut r = r.without_timings();
        r.config.parallel = true;
        r
    };
    assert_eq!(strip(&a), strip(&b));
    let other = run_benchmark(&ExperimentConfig { seed: 8, ..config }).unwrap();
    assert_ne!(strip(&a).runs, strip(&other).runs);
}

#[test]
fn cluster_known_matches_rmb_cle_on_recovered_repetitions() {
    let report = run_benchmark(&smoke(ProblemKind::Classification)).unwrap();
    for run in report.runs_of(Method::RmbClePooled) {
        let ck = report.runs_of(Method::CkPooled).find(|r| r.repetition == run.repetition).unwrap();
        if run.exact_recovery == Some(true) {
            assert_eq!(run.digest, ck.digest);
        }
    }
}

#[test]
fn cv_selection_matches_an_independent_trace() {
    let spec = SyntheticSource {
        n_clusters: Some(3),
        tasks_per_cluster: Some(3),
        n_train: Some(120),
        ..SyntheticSource::preset(ProblemKind::Regression)
    }
    .spec(5);
    let ds = generate(&spec).unwrap();
    let (train, _) = ds.train_test().unwrap();
    let ctx = FitContext::new(0.1);
    let points = [BlockSizes { s1: 0, s2: 30, s4: 20 }, BlockSizes { s1: 0, s2: 30, s4: 100 }];
    let outcome = grid_search(Method::RmbClePooled, &ctx, &train, &points, 5, 11).unwrap();

    // Oracle: refit the full pipeline on every fold and score by hand.
    let folds = make_folds(&train, 5, 11).unwrap();
    let mut oracle = vec![0.0; points.len()];
    for (p, &blocks) in points.iter().enumerate() {
        let config = ctx.rmb_config(Method::RmbClePooled, blocks).unwrap();
        for f in 0..folds.k {
            let (fit, valid) = folds.split(&train, f).unwrap();
            let model = RmbCleModel::train(&fit, &config).unwrap();
            for (t, task) in valid.tasks().iter().enumerate() {
                let pred = model.predict_task(t, task.features()).unwrap();
                oracle[p] += selection_score(valid.kind(), &pred, task.targets()).unwrap();
            }
        }
        oracle[p] /= (folds.k * train.n_tasks()) as f64;
    }
    for ((b, score), want) in outcome.trace.iter().zip(&oracle) {
        assert!((score - want).abs() < 1e-12, "{b}: {score} vs {want}");
    }
    assert!(oracle[1] > oracle[0]);
    assert_eq!(outcome.selection, Selection::Shared(points[1]));
}

#[test]
fn single_task_selection_is_per_task() {
    let ds = generate(&SyntheticSource {
        n_clusters: Some(2),
        tasks_per_cluster: Some(2),
        n_train: Some(40),
        ..SyntheticSource::preset(ProblemKind::Classification)
    }
    .spec(2))
    .unwrap();
    let (train, _) = ds.train_test().unwrap();
    let points = [BlockSizes { s1: 0, s2: 5, s4: 0 }, BlockSizes { s1: 0, s2: 60, s4: 0 }];
    let outcome = grid_search(Method::St, &FitContext::new(0.1), &train, &points, 5, 0).unwrap();
    let Selection::PerTask(chosen) = outcome.selection else { panic!("expected per-task selection") };
    assert_eq!(chosen.len(), 4);
    assert!(chosen.iter().all(|b| points.contains(b)));
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["smoke.toml", "synthetic.toml"] {
        let config = ExperimentConfig::load(&dir.join(name)).unwrap();
        config.validate().unwrap();
    }
}
