use proptest::prelude::*;
use rmb_cle::boost::{fit_stump, BoostParams, BoostedModel, MtgbModel, Stump};
use rmb_cle::data::{MultiTaskCollection, ProblemKind, TaskDataset};
use rmb_cle::loss;
use rmb_cle::Matrix;

/// Weighted squared error of a stump on `(x, r)`.
fn sse(stump: &Stump, x: &Matrix, r: &[f64], w: &[f64]) -> f64 {
    x.iter_rows()
        .zip(r)
        .zip(w)
        .map(|((row, ri), wi)| wi * (ri - stump.predict(row)).powi(2))
        .sum()
}

/// Tries every midpoint of every feature, recomputing leaf means from scratch.
fn brute_force(x: &Matrix, r: &[f64], w: &[f64]) -> Vec<(f64, usize, f64)> {
    let mut out = Vec::new();
    for f in 0..x.cols() {
        let mut vals: Vec<f64> = (0..x.rows()).map(|i| x[(i, f)]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for pair in vals.windows(2) {
            let t = 0.5 * (pair[0] + pair[1]);
            let side = |left: bool| {
                let (mut sw, mut s) = (0.0, 0.0);
                for i in 0..x.rows() {
                    if (x[(i, f)] <= t) == left {
                        sw += w[i];
                        s += w[i] * r[i];
                    }
                }
                s / sw
            };
            let stump = Stump {
                feature: f,
                threshold: t,
                left: side(true),
                right: side(false),
            };
            out.push((sse(&stump, x, r, w), f, t));
        }
    }
    out
}

fn instance() -> impl Strategy<Value = (Matrix, Vec<f64>, Vec<f64>)> {
    (1usize..4, 2usize..25).prop_flat_map(|(d, n)| {
        (
            proptest::collection::vec(-5i32..5, n * d),
            proptest::collection::vec(-10.0f64..10.0, n),
            proptest::collection::vec(0.1f64..3.0, n),
        )
            .prop_map(move |(xs, r, w)| {
                let x = Matrix::from_vec(n, d, xs.into_iter().map(f64::from).collect()).unwrap();
                (x, r, w)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn stump_matches_brute_force_search((x, r, w) in instance()) {
        let stump = fit_stump(&x, &r, Some(&w)).unwrap();
        let total_w: f64 = w.iter().sum();
        let mean = w.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / total_w;
        let constant_sse = sse(&Stump::constant(mean), &x, &r, &w);
        let candidates = brute_force(&x, &r, &w);
        let best = candidates.iter().map(|c| c.0).fold(constant_sse, f64::min);
        let got = sse(&stump, &x, &r, &w);
        let tol = 1e-9 * (1.0 + constant_sse);
        prop_assert!((got - best).abs() <= tol, "got {got}, brute force {best}");

        // With a clear winner the exact split must agree, including the tie order.
        let mut sorted = candidates.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
        if let Some(first) = sorted.first() {
            let runner_up = sorted.iter().find(|c| c.0 > first.0 + 1e-6 * (1.0 + constant_sse));
            let unique = sorted.iter().filter(|c| c.0 <= first.0 + 1e-9 * (1.0 + constant_sse)).count() == 1;
            if unique && first.0 < constant_sse - 1e-6 * (1.0 + constant_sse) && runner_up.is_some() {
                prop_assert_eq!(stump.feature, first.1);
                prop_assert_eq!(stump.threshold, first.2);
            }
        }
    }
}

fn random_task(kind: ProblemKind, xs: Vec<f64>, d: usize, ys: Vec<f64>) -> TaskDataset {
    let n = ys.len();
    TaskDataset::new(0, Matrix::from_vec(n, d, xs).unwrap(), ys, kind).unwrap()
}

fn classification_instance() -> impl Strategy<Value = (TaskDataset, usize)> {
    (2usize..4, 6usize..30, 1usize..4).prop_flat_map(|(q, n, d)| {
        (
            proptest::collection::vec(-3.0f64..3.0, n * d),
            proptest::collection::vec(0..q, n),
        )
            .prop_map(move |(xs, ys)| {
                let mut ys: Vec<f64> = ys.into_iter().map(|y| y as f64).collect();
                ys[0] = 0.0;
                ys[1] = 1.0;
                (random_task(ProblemKind::Classification, xs, d, ys), q)
            })
    })
}

fn regression_instance() -> impl Strategy<Value = TaskDataset> {
    (4usize..30, 1usize..4).prop_flat_map(|(n, d)| {
        (
            proptest::collection::vec(-3.0f64..3.0, n * d),
            proptest::collection::vec(-5.0f64..5.0, n),
        )
            .prop_map(move |(xs, ys)| random_task(ProblemKind::Regression, xs, d, ys))
    })
}

/// Central finite difference of the mean loss with respect to one score.
fn finite_difference(kind: ProblemKind, y: f64, scores: &[f64], q: usize) -> f64 {
    let h = 1e-5;
    let mut up = scores.to_vec();
    let mut down = scores.to_vec();
    up[q] += h;
    down[q] -= h;
    (loss::sample_loss(kind, y, &up) - loss::sample_loss(kind, y, &down)) / (2.0 * h)
}

fn check_round_targets(task: &TaskDataset, q: usize) -> Result<(), TestCaseError> {
    let mut checked = 0;
    let mut failure = None;
    BoostedModel::fit_observed(task.features(), task.targets(), task.kind(), q, BoostParams::new(8), |trace| {
        for (v, y) in task.targets().iter().enumerate() {
            let s = &trace.scores[v * trace.n_outputs..(v + 1) * trace.n_outputs];
            for out in 0..trace.n_outputs {
                let fd = -finite_difference(task.kind(), *y, s, out);
                let g = trace.targets[v * trace.n_outputs + out];
                if (g - fd).abs() > 1e-6 * g.abs().max(1e-2) && failure.is_none() {
                    failure = Some(format!("round {} sample {v} output {out}: {g} vs {fd}", trace.round));
                }
                checked += 1;
            }
        }
    })
    .unwrap();
    prop_assert!(failure.is_none(), "{}", failure.unwrap_or_default());
    prop_assert!(checked > 0);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn round_targets_are_negative_gradients((task, q) in classification_instance(), reg in regression_instance()) {
        check_round_targets(&task, q)?;
        check_round_targets(&reg, 0)?;
    }

    #[test]
    fn training_loss_never_increases((task, q) in classification_instance(), reg in regression_instance()) {
        for (t, q) in [(&task, q), (&reg, 0)] {
            let model = BoostedModel::fit_task(t, q, BoostParams::new(25)).unwrap();
            let mut prev = f64::INFINITY;
            for r in 0..=25 {
                let l = model.truncated(r).loss(t.features(), t.targets()).unwrap();
                prop_assert!(l <= prev + 1e-12, "round {r}: {l} > {prev}");
                prev = l;
            }
        }
    }

    #[test]
    fn scores_are_init_plus_scaled_stump_sum(reg in regression_instance()) {
        let model = BoostedModel::fit_task(&reg, 0, BoostParams::new(12)).unwrap();
        for x in reg.features().iter_rows() {
            let direct = model.init[0] + model.block.stages.iter().map(|s| 0.1 * s[0].predict(x)).sum::<f64>();
            let got = model.raw_scores(x).unwrap()[0];
            prop_assert!((got - direct).abs() < 1e-12);
        }
    }
}

fn two_task_collection() -> MultiTaskCollection {
    let make = |id, shift: f64| {
        let xs: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let ys = xs.iter().map(|x| x * x + shift).collect();
        TaskDataset::new(id, Matrix::from_vec(30, 1, xs).unwrap(), ys, ProblemKind::Regression).unwrap()
    };
    MultiTaskCollection::new(vec![make(0, 0.0), make(1, 2.0)]).unwrap()
}

#[test]
fn mtgb_without_specific_block_equals_pooled_boosting() {
    let coll = two_task_collection();
    let mtgb = MtgbModel::fit(&coll, 20, 0, 0.1).unwrap();
    let pooled = Matrix::vstack(coll.tasks().iter().map(|t| t.features()), 1).unwrap();
    let targets: Vec<f64> = coll.tasks().iter().flat_map(|t| t.targets().to_vec()).collect();
    let dp = BoostedModel::fit(&pooled, &targets, ProblemKind::Regression, 0, BoostParams::new(20)).unwrap();
    assert_eq!(mtgb.shared, dp);
    for t in 0..2 {
        assert_eq!(mtgb.predict_matrix(t, &pooled).unwrap(), dp.predict_matrix(&pooled).unwrap());
    }
}

#[test]
fn mtgb_specific_blocks_fit_each_task() {
    let coll = two_task_collection();
    let mtgb = MtgbModel::fit(&coll, 10, 40, 0.1).unwrap();
    let x = coll.task(0).unwrap().features();
    let p0 = mtgb.predict_matrix(0, x).unwrap();
    let p1 = mtgb.predict_matrix(1, x).unwrap();
    let gap: f64 = p1.iter().zip(&p0).map(|(a, b)| a - b).sum::<f64>() / p0.len() as f64;
    assert!((gap - 2.0).abs() < 0.2, "mean gap {gap}");
    assert_eq!(mtgb.n_stumps(1), 50);
}
