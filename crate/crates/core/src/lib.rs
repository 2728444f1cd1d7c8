//! Multi-task gradient boosting with error-driven task clustering and
//! cluster-local ensembles.

pub mod baselines;
pub mod boost;
pub mod clustering;
pub mod data;
pub mod error;
pub mod loss;
pub mod matrix;
pub mod pipeline;
pub mod rng;
pub mod similarity;
pub mod synth;
pub mod theory;

pub use baselines::{train_baseline, train_single_task, BaselineKind, BaselineModel, BaselineSpec};
pub use boost::{BoostParams, BoostedModel, MtgbModel, Stump};
pub use clustering::{Dendrogram, Linkage, Partition};
pub use data::{MultiTaskCollection, ProblemKind, TaskDataset};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use similarity::{SimilarityGeometry, SimilaritySource};
pub use pipeline::{LocalEnsemble, RmbCleConfig, RmbCleModel, TaskPredictor};
