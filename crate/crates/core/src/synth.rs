//! Random-Fourier-feature multi-task generator with a known cluster structure.
//!
//! Each cluster owns a common function and each task a task-specific one;
//! task targets are `omega * common(x) + (1 - omega) * specific(x)` with `x`
//! uniform on `[-1, 1]^d`. Classification labels threshold each task at the
//! median of its full (train + test) sample.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{MultiTaskCollection, ProblemKind, TaskDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Parameters of one random Fourier feature function
/// `sqrt(2 tau / kappa) * sum_r phi_r * cos(<w_r, x> / (lambda d) + b_r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffParams {
    pub weights: Vec<f64>,
    /// `kappa x d`, one direction per row.
    pub directions: Matrix,
    pub phases: Vec<f64>,
    pub scale: f64,
    pub length_scale: f64,
}

impl RffParams {
    pub fn sample<R: Rng + ?Sized>(
        rng: &mut R,
        kappa: usize,
        dim: usize,
        scale: f64,
        length_scale: f64,
    ) -> Result<Self> {
        if kappa == 0 || dim == 0 {
            return Err(Error::InvalidConfig("kappa and dim must be at least 1".into()));
        }
        let weights: Vec<f64> = (0..kappa).map(|_| rng.sample(StandardNormal)).collect();
        let directions = Matrix::from_fn(kappa, dim, |_, _| rng.sample(StandardNormal));
        let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range");
        let phases: Vec<f64> = (0..kappa).map(|_| phase.sample(rng)).collect();
        let params = Self {
            weights,
            directions,
            phases,
            scale,
            length_scale,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let kappa = self.weights.len();
        if kappa == 0 || self.directions.rows() != kappa || self.phases.len() != kappa {
            return Err(Error::InvalidConfig("inconsistent random feature count".into()));
        }
        if !(self.scale > 0.0) || !(self.length_scale > 0.0) {
            return Err(Error::InvalidConfig("scale and length scale must be positive".into()));
        }
        Ok(())
    }

    pub fn kappa(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.directions.cols()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let inv = 1.0 / (self.length_scale * self.dim() as f64);
        let sum: f64 = self
            .weights
            .iter()
            .zip(self.directions.iter_rows())
            .zip(&self.phases)
            .map(|((phi, w), b)| {
                let proj: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                phi * (inv * proj + b).cos()
            })
            .sum();
        (2.0 * self.scale / self.kappa() as f64).sqrt() * sum
    }

    /// `sqrt(2 tau / kappa) * sum |phi_r|`, an upper bound on `|eval(x)|`.
    pub fn amplitude_bound(&self) -> f64 {
        (2.0 * self.scale / self.kappa() as f64).sqrt() * self.weights.iter().map(|w| w.abs()).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_clusters: usize,
    pub tasks_per_cluster: usize,
    pub omega: f64,
    pub dim: usize,
    pub kappa: usize,
    pub tau: f64,
    pub length_scale: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub kind: ProblemKind,
    pub seed: u64,
    /// Standard deviation of additive Gaussian target noise. Zero disables it.
    #[serde(default)]
    pub noise_std: f64,
}

impl SyntheticSpec {
    /// Five clusters of five tasks, `omega = 0.9`, `d = 5`, 300 train and
    /// 1000 test samples per task.
    pub fn preset(kind: ProblemKind, seed: u64) -> Self {
        Self {
            n_clusters: 5,
            tasks_per_cluster: 5,
            omega: 0.9,
            dim: 5,
            kappa: 64,
            tau: 1.0,
            length_scale: 1.0,
            n_train: 300,
            n_test: 1000,
            kind,
            seed,
            noise_std: 0.0,
        }
    }

    pub fn n_tasks(&self) -> usize {
        self.n_clusters * self.tasks_per_cluster
    }

    pub fn cluster_of(&self, task: usize) -> usize {
        task / self.tasks_per_cluster
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_clusters == 0 || self.tasks_per_cluster == 0 {
            return bad("need at least one cluster and one task per cluster");
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return bad("omega must lie in (0, 1]");
        }
        if self.dim == 0 || self.kappa == 0 {
            return bad("dim and kappa must be at least 1");
        }
        if !(self.tau > 0.0) || !(self.length_scale > 0.0) {
            return bad("tau and length scale must be positive");
        }
        if self.n_train == 0 || self.n_test == 0 {
            return bad("n_train and n_test must be at least 1");
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub assignment: Vec<usize>,
    pub omega: f64,
    pub cluster_functions: Vec<RffParams>,
    pub task_functions: Vec<RffParams>,
}

impl GroundTruth {
    /// Noise-free regression function of `task`.
    pub fn task_function(&self, task: usize, x: &[f64]) -> Result<f64> {
        let cluster = *self.assignment.get(task).ok_or(Error::UnknownTask(task))?;
        let common = self.cluster_functions[cluster].eval(x)?;
        let specific = self.task_functions[task].eval(x)?;
        Ok(self.omega * common + (1.0 - self.omega) * specific)
    }
}

/// Generated data: every task holds `n_train` training rows followed by `n_test` test rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub collection: MultiTaskCollection,
    pub n_train: usize,
    pub truth: GroundTruth,
    pub spec: SyntheticSpec,
}

impl SyntheticDataset {
    pub fn train_test(&self) -> Result<(MultiTaskCollection, MultiTaskCollection)> {
        let n = self.n_train;
        let total = n + self.spec.n_test;
        let train_rows: Vec<usize> = (0..n).collect();
        let test_rows: Vec<usize> = (n..total).collect();
        let q = self.collection.n_classes();
        let train = self.collection.tasks().iter().map(|t| t.select(&train_rows)).collect();
        let test = self.collection.tasks().iter().map(|t| t.select(&test_rows)).collect();
        Ok((
            MultiTaskCollection::with_classes(train, q)?,
            MultiTaskCollection::with_classes(test, q)?,
        ))
    }

    /// JSON provenance stored next to persisted collections.
    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "generator": "random-fourier-features",
            "spec": self.spec,
            "ground_truth_assignment": self.truth.assignment,
            "n_train_per_task": self.n_train,
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Generates the collection and its ground truth; deterministic given `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let cluster_functions = (0..spec.n_clusters)
        .map(|c| {
            let mut r = rng::stream(spec.seed, "cluster-function", c as u64);
            RffParams::sample(&mut r, spec.kappa, spec.dim, spec.tau, spec.length_scale)
        })
        .collect::<Result<Vec<_>>>()?;

    let m = spec.n_tasks();
    let total = spec.n_train + spec.n_test;
    let assignment: Vec<usize> = (0..m).map(|t| spec.cluster_of(t)).collect();
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");

    let mut task_functions = Vec::with_capacity(m);
    let mut tasks = Vec::with_capacity(m);
    for task in 0..m {
        let mut r = rng::stream(spec.seed, "task", task as u64);
        let specific = RffParams::sample(&mut r, spec.kappa, spec.dim, spec.tau, spec.length_scale)?;
        let common = &cluster_functions[assignment[task]];
        let features = Matrix::from_fn(total, spec.dim, |_, _| unit.sample(&mut r));
        let mut y: Vec<f64> = features
            .iter_rows()
            .map(|x| spec.omega * common.eval_unchecked(x) + (1.0 - spec.omega) * specific.eval_unchecked(x))
            .collect();
        if spec.noise_std > 0.0 {
            for v in &mut y {
                let z: f64 = r.sample(StandardNormal);
                *v += spec.noise_std * z;
            }
        }
        if spec.kind == ProblemKind::Classification {
            let med = median(&y);
            for v in &mut y {
                *v = if *v > med { 1.0 } else { 0.0 };
            }
        }
        tasks.push(TaskDataset::new(task, features, y, spec.kind)?);
        task_functions.push(specific);
    }

    let collection = match spec.kind {
        ProblemKind::Regression => MultiTaskCollection::new(tasks)?,
        ProblemKind::Classification => MultiTaskCollection::with_classes(tasks, 2)?,
    };
    Ok(SyntheticDataset {
        collection,
        n_train: spec.n_train,
        truth: GroundTruth {
            assignment,
            omega: spec.omega,
            cluster_functions,
            task_functions,
        },
        spec: spec.clone(),
    })
}
