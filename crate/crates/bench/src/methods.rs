//! Benchmarked methods, their block-size grids and fitted forms.

use std::fmt;
use std::str::FromStr;

use rmb_cle::baselines::train_single_task;
use rmb_cle::{
    train_baseline, BaselineModel, BaselineSpec, Linkage, Matrix, MultiTaskCollection, RmbCleConfig, RmbCleModel,
    SimilaritySource, TaskPredictor,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    St,
    Dp,
    Taf,
    Mtgb,
    RmbClePooled,
    RmbCleMtgb,
    /// RMB-CLE local ensembles on the ground-truth partition.
    CkPooled,
    CkMtgb,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::St,
        Method::Dp,
        Method::Taf,
        Method::Mtgb,
        Method::RmbClePooled,
        Method::RmbCleMtgb,
        Method::CkPooled,
        Method::CkMtgb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::St => "st",
            Method::Dp => "dp",
            Method::Taf => "taf",
            Method::Mtgb => "mtgb",
            Method::RmbClePooled => "rmb-cle-pooled",
            Method::RmbCleMtgb => "rmb-cle-mtgb",
            Method::CkPooled => "ck-pooled",
            Method::CkMtgb => "ck-mtgb",
        }
    }

    pub fn needs_truth(self) -> bool {
        matches!(self, Method::CkPooled | Method::CkMtgb)
    }

    pub fn clusters(self) -> bool {
        matches!(self, Method::RmbClePooled | Method::RmbCleMtgb)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Block sizes of one grid point; blocks a method does not use are 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockSizes {
    pub s1: usize,
    pub s2: usize,
    pub s4: usize,
}

impl BlockSizes {
    pub fn total(&self) -> usize {
        self.s1 + self.s2 + self.s4
    }
}

impl fmt::Display for BlockSizes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s1={} s2={} s4={}", self.s1, self.s2, self.s4)
    }
}

/// Candidate values per block.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub s4: Vec<usize>,
}

impl Grid {
    fn new(s1: &[usize], s2: &[usize], s4: &[usize]) -> Self {
        Self {
            s1: s1.to_vec(),
            s2: s2.to_vec(),
            s4: s4.to_vec(),
        }
    }

    /// Grid points for `method`, in `s1`, `s2`, `s4` nesting order.
    pub fn points(&self, method: Method) -> Result<Vec<BlockSizes>> {
        let (use1, use2, use4) = match method {
            Method::St => (false, true, false),
            Method::Dp | Method::Taf => (true, false, false),
            Method::Mtgb | Method::CkMtgb => (true, true, false),
            Method::RmbClePooled => (false, true, true),
            Method::CkPooled => (false, false, true),
            Method::RmbCleMtgb => (true, true, true),
        };
        let axis = |used: bool, values: &[usize], name: &str| -> Result<Vec<usize>> {
            match (used, values.is_empty()) {
                (false, _) => Ok(vec![0]),
                (true, true) => Err(Error::Config(format!("grid for {method} needs {name} values"))),
                (true, false) => Ok(values.to_vec()),
            }
        };
        let (a1, a2, a4) = (axis(use1, &self.s1, "s1")?, axis(use2, &self.s2, "s2")?, axis(use4, &self.s4, "s4")?);
        let mut out = Vec::new();
        for &s1 in &a1 {
            for &s2 in &a2 {
                for &s4 in &a4 {
                    out.push(BlockSizes { s1, s2, s4 });
                }
            }
        }
        Ok(out)
    }
}

/// Per-method grids; the defaults are the published search space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub st: Grid,
    pub dp: Grid,
    pub taf: Grid,
    pub mtgb: Grid,
    pub rmb_cle_pooled: Grid,
    pub rmb_cle_mtgb: Grid,
    pub ck_pooled: Grid,
    pub ck_mtgb: Grid,
}

impl Default for Grids {
    fn default() -> Self {
        let sizes = [20, 30, 50, 100];
        let shared = [20, 30, 50];
        let specific = [0, 20, 30, 50, 100];
        Self {
            st: Grid::new(&[], &sizes, &[]),
            dp: Grid::new(&sizes, &[], &[]),
            taf: Grid::new(&sizes, &[], &[]),
            mtgb: Grid::new(&shared, &specific, &[]),
            rmb_cle_pooled: Grid::new(&[], &sizes, &[100]),
            rmb_cle_mtgb: Grid::new(&shared, &specific, &[100]),
            ck_pooled: Grid::new(&[], &[], &[100]),
            ck_mtgb: Grid::new(&shared, &specific, &[]),
        }
    }
}

impl Grids {
    pub fn get(&self, method: Method) -> &Grid {
        match method {
            Method::St => &self.st,
            Method::Dp => &self.dp,
            Method::Taf => &self.taf,
            Method::Mtgb => &self.mtgb,
            Method::RmbClePooled => &self.rmb_cle_pooled,
            Method::RmbCleMtgb => &self.rmb_cle_mtgb,
            Method::CkPooled => &self.ck_pooled,
            Method::CkMtgb => &self.ck_mtgb,
        }
    }

    pub fn get_mut(&mut self, method: Method) -> &mut Grid {
        match method {
            Method::St => &mut self.st,
            Method::Dp => &mut self.dp,
            Method::Taf => &mut self.taf,
            Method::Mtgb => &mut self.mtgb,
            Method::RmbClePooled => &mut self.rmb_cle_pooled,
            Method::RmbCleMtgb => &mut self.rmb_cle_mtgb,
            Method::CkPooled => &mut self.ck_pooled,
            Method::CkMtgb => &mut self.ck_mtgb,
        }
    }
}

/// Clustering options shared by the RMB-CLE and cluster-known methods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmbOptions {
    pub epsilon: f64,
    pub k_max: Option<usize>,
    pub similarity_source: SimilaritySource,
    pub linkage: Linkage,
}

impl Default for RmbOptions {
    fn default() -> Self {
        let d = RmbCleConfig::default();
        Self {
            epsilon: d.epsilon,
            k_max: d.k_max,
            similarity_source: d.similarity_source,
            linkage: d.linkage,
        }
    }
}

/// Everything needed to fit a method besides its block sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct FitContext {
    pub learning_rate: f64,
    pub rmb: RmbOptions,
    /// Ground-truth partition for the cluster-known methods.
    pub truth: Option<Vec<usize>>,
}

impl FitContext {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            rmb: RmbOptions::default(),
            truth: None,
        }
    }

    /// Pipeline configuration for a clustered method at `blocks`.
    ///
    /// Pooled: `s2` per-task rounds, `s4` local rounds. Two-block: `s4`
    /// per-task rounds, `(s1, s2)` local blocks. Cluster-known methods
    /// never fit per-task models, so their per-task count is a placeholder.
    pub fn rmb_config(&self, method: Method, blocks: BlockSizes) -> Result<RmbCleConfig> {
        let base = match method {
            Method::RmbClePooled => RmbCleConfig::pooled(blocks.s2, blocks.s4),
            Method::CkPooled => RmbCleConfig::pooled(1, blocks.s4),
            Method::RmbCleMtgb => RmbCleConfig::two_block(blocks.s4, blocks.s1, blocks.s2),
            Method::CkMtgb => RmbCleConfig::two_block(1, blocks.s1, blocks.s2),
            other => return Err(Error::Config(format!("{other} is not a clustered method"))),
        };
        Ok(RmbCleConfig {
            learning_rate: self.learning_rate,
            epsilon: self.rmb.epsilon,
            k_max: self.rmb.k_max,
            similarity_source: self.rmb.similarity_source,
            linkage: self.rmb.linkage,
            ..base
        })
    }

    fn truth(&self, method: Method) -> Result<&[usize]> {
        self.truth
            .as_deref()
            .ok_or_else(|| Error::Config(format!("{method} needs a ground-truth partition")))
    }

    /// Fits `method` with the same block sizes for every task.
    pub fn fit(&self, method: Method, blocks: BlockSizes, train: &MultiTaskCollection) -> Result<Fitted> {
        let lr = self.learning_rate;
        let baseline = |spec: BaselineSpec| -> Result<Fitted> { Ok(Fitted::Baseline(train_baseline(&spec, train, lr)?)) };
        match method {
            Method::St => baseline(BaselineSpec::SingleTask { rounds: blocks.s2 }),
            Method::Dp => baseline(BaselineSpec::DataPooling { rounds: blocks.s1 }),
            Method::Taf => baseline(BaselineSpec::TaskAsFeature { rounds: blocks.s1 }),
            Method::Mtgb => baseline(BaselineSpec::Mtgb {
                shared_rounds: blocks.s1,
                specific_rounds: blocks.s2,
            }),
            Method::RmbClePooled | Method::RmbCleMtgb => {
                Ok(Fitted::RmbCle(RmbCleModel::train(train, &self.rmb_config(method, blocks)?)?))
            }
            Method::CkPooled | Method::CkMtgb => baseline(BaselineSpec::ClusterKnown {
                partition: self.truth(method)?.to_vec(),
                config: self.rmb_config(method, blocks)?,
            }),
        }
    }

    /// Single-task models with a round count per task.
    pub fn fit_single_task(&self, rounds: &[usize], train: &MultiTaskCollection) -> Result<Fitted> {
        Ok(Fitted::Baseline(train_single_task(train, rounds, self.learning_rate)?))
    }
}

/// A trained model of any method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Fitted {
    Baseline(BaselineModel),
    RmbCle(RmbCleModel),
}

impl Fitted {
    /// The recovered partition, for methods that cluster.
    pub fn partition(&self) -> Option<&rmb_cle::Partition> {
        match self {
            Fitted::RmbCle(model) => Some(&model.partition),
            Fitted::Baseline(BaselineModel::ClusterKnown { model }) => Some(&model.partition),
            Fitted::Baseline(_) => None,
        }
    }
}

impl TaskPredictor for Fitted {
    fn n_tasks(&self) -> usize {
        match self {
            Fitted::Baseline(m) => m.n_tasks(),
            Fitted::RmbCle(m) => m.n_tasks(),
        }
    }

    fn predict_task(&self, task: usize, features: &Matrix) -> rmb_cle::Result<Vec<f64>> {
        match self {
            Fitted::Baseline(m) => m.predict_task(task, features),
            Fitted::RmbCle(m) => m.predict_task(task, features),
        }
    }

    fn prediction_cost(&self, task: usize) -> rmb_cle::Result<usize> {
        match self {
            Fitted::Baseline(m) => m.prediction_cost(task),
            Fitted::RmbCle(m) => m.prediction_cost(task),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("gbm".parse::<Method>().is_err());
    }

    #[test]
    fn default_grid_sizes() {
        let g = Grids::default();
        let count = |m| g.get(m).points(m).unwrap().len();
        assert_eq!(count(Method::St), 4);
        assert_eq!(count(Method::Dp), 4);
        assert_eq!(count(Method::Mtgb), 15);
        assert_eq!(count(Method::RmbClePooled), 4);
        assert_eq!(count(Method::RmbCleMtgb), 15);
        assert_eq!(count(Method::CkPooled), 1);
        assert_eq!(g.st.points(Method::St).unwrap()[0], BlockSizes { s1: 0, s2: 20, s4: 0 });
    }

    #[test]
    fn missing_axis_is_rejected() {
        let grid = Grid::new(&[20], &[], &[]);
        assert!(grid.points(Method::St).is_err());
        assert_eq!(grid.points(Method::Dp).unwrap().len(), 1);
    }

    #[test]
    fn pooled_blocks_map_to_pipeline_config() {
        let ctx = FitContext::new(0.05);
        let c = ctx.rmb_config(Method::RmbClePooled, BlockSizes { s1: 0, s2: 30, s4: 100 }).unwrap();
        assert_eq!(c.per_task_rounds, 30);
        assert_eq!(c.local.total_rounds(), 100);
        assert_eq!(c.learning_rate, 0.05);
        assert!(ctx.rmb_config(Method::St, BlockSizes::default()).is_err());
    }
}
