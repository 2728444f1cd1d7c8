//! Agglomerative task clustering, dendrogram cuts and silhouette-based
//! selection of the cluster count.
//!
//! Node indices follow the usual convention: leaves are `0..m`, the node
//! created by merge `t` is `m + t`. When several pairs are at the same
//! distance the lexicographically smallest `(i, j)` node pair merges first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest cluster count scanned by default.
pub const DEFAULT_K_MAX: usize = 10;

/// Default scan limit for `m` tasks. The all-singleton cut always has a
/// mean silhouette of exactly 1, so it is left out unless `m = 2`.
pub fn default_k_max(m: usize) -> usize {
    if m <= 2 {
        m
    } else {
        (m - 1).min(DEFAULT_K_MAX)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    /// UPGMA: size-weighted mean pairwise distance.
    #[default]
    Average,
    /// Maximum pairwise distance.
    Complete,
}

impl Linkage {
    /// Lance-Williams update for the distance of `A u B` to `C`.
    #[inline]
    fn update(self, size_a: usize, size_b: usize, d_ac: f64, d_bc: f64) -> f64 {
        match self {
            Linkage::Average => {
                let (a, b) = (size_a as f64, size_b as f64);
                (a * d_ac + b * d_bc) / (a + b)
            }
            Linkage::Complete => d_ac.max(d_bc),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

/// Flat clustering: `assignment[task]` in `0..k`, numbered by the smallest task of each cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub assignment: Vec<usize>,
    pub k: usize,
    pub mean_silhouette: f64,
}

impl Partition {
    /// Partition from arbitrary labels, relabeled canonically. The silhouette is left at 0.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("partition has no tasks"));
        }
        let assignment = canonical_labels(labels);
        let k = assignment.iter().max().map_or(0, |&c| c + 1);
        Ok(Self {
            assignment,
            k,
            mean_silhouette: 0.0,
        })
    }

    /// Task ids of each cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (task, &c) in self.assignment.iter().enumerate() {
            out[c].push(task);
        }
        out
    }

    /// Equality up to a relabeling of clusters.
    pub fn same_grouping(&self, labels: &[usize]) -> bool {
        labels.len() == self.assignment.len() && canonical_labels(labels) == self.assignment
    }
}

/// Relabels clusters `0, 1, ..` in order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Checks squareness, finiteness, non-negativity, zero diagonal and symmetry.
pub fn validate_distances(distances: &Matrix) -> Result<()> {
    if !distances.is_square() {
        return Err(Error::InvalidDistances("matrix is not square".into()));
    }
    let m = distances.rows();
    for i in 0..m {
        if distances[(i, i)] != 0.0 {
            return Err(Error::InvalidDistances(format!("diagonal entry {i} is not zero")));
        }
        for j in 0..m {
            let d = distances[(i, j)];
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidDistances(format!("entry ({i}, {j}) = {d}")));
            }
            if (d - distances[(j, i)]).abs() > 1e-12 * (1.0 + d.abs()) {
                return Err(Error::InvalidDistances(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
            }
        }
    }
    Ok(())
}

/// Agglomerative clustering with Lance-Williams distance updates.
pub fn linkage(distances: &Matrix, method: Linkage) -> Result<Dendrogram> {
    validate_distances(distances)?;
    let m = distances.rows();
    if m < 2 {
        return Err(Error::InvalidDistances(format!("need at least 2 tasks, got {m}")));
    }
    let total = 2 * m - 1;
    let mut dist = vec![vec![f64::INFINITY; total]; total];
    for i in 0..m {
        for j in 0..m {
            dist[i][j] = distances[(i, j)];
        }
    }
    let mut size = vec![1usize; total];
    // Kept sorted: new nodes always carry the largest index.
    let mut active: Vec<usize> = (0..m).collect();
    let mut merges = Vec::with_capacity(m - 1);

    for t in 0..m - 1 {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for (p, &i) in active.iter().enumerate() {
            for &j in &active[p + 1..] {
                if dist[i][j] < best.2 {
                    best = (i, j, dist[i][j]);
                }
            }
        }
        let (a, b, d) = best;
        let node = m + t;
        size[node] = size[a] + size[b];
        active.retain(|&x| x != a && x != b);
        for &c in &active {
            let v = method.update(size[a], size[b], dist[a][c], dist[b][c]);
            dist[node][c] = v;
            dist[c][node] = v;
        }
        active.push(node);
        merges.push(Merge {
            left: a,
            right: b,
            distance: d,
            size: size[node],
        });
    }
    Ok(Dendrogram {
        n_leaves: m,
        linkage: method,
        merges,
    })
}

/// Average-linkage (UPGMA) clustering.
pub fn upgma(distances: &Matrix) -> Result<Dendrogram> {
    linkage(distances, Linkage::Average)
}

impl Dendrogram {
    /// Flat assignment with exactly `k` clusters, obtained by undoing the last `k - 1` merges.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        let m = self.n_leaves;
        if k < 1 || k > m {
            return Err(Error::ClusterCount { k, min: 1, max: m });
        }
        let mut owner: Vec<usize> = (0..2 * m - 1).collect();
        let mut members: Vec<Vec<usize>> = (0..2 * m - 1).map(|i| if i < m { vec![i] } else { Vec::new() }).collect();
        for (t, merge) in self.merges.iter().take(m - k).enumerate() {
            let node = m + t;
            let mut joined = std::mem::take(&mut members[merge.left]);
            joined.append(&mut std::mem::take(&mut members[merge.right]));
            for &leaf in &joined {
                owner[leaf] = node;
            }
            members[node] = joined;
        }
        Ok(canonical_labels(&owner[..m]))
    }
}

/// Free-function form of [`Dendrogram::cut`], restricted to `2 <= k <= m`.
pub fn cut(dendrogram: &Dendrogram, k: usize) -> Result<Vec<usize>> {
    if k < 2 || k > dendrogram.n_leaves {
        return Err(Error::ClusterCount {
            k,
            min: 2,
            max: dendrogram.n_leaves,
        });
    }
    dendrogram.cut(k)
}

/// Per-task silhouette values and their mean. Singletons have zero
/// within-cluster distance; a task with `a = b = 0` scores 0.
pub fn silhouette(distances: &Matrix, assignment: &[usize]) -> Result<(Vec<f64>, f64)> {
    let m = distances.rows();
    if assignment.len() != m || !distances.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: assignment.len(),
        });
    }
    let k = assignment.iter().max().map_or(0, |&c| c + 1);
    let mut sizes = vec![0usize; k];
    for &c in assignment {
        sizes[c] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::ClusterCount { k: 1, min: 2, max: m });
    }
    let scores: Vec<f64> = (0..m)
        .map(|i| {
            let mut sums = vec![0.0; k];
            for j in 0..m {
                if j != i {
                    sums[assignment[j]] += distances[(i, j)];
                }
            }
            let own = assignment[i];
            let a = if sizes[own] > 1 { sums[own] / (sizes[own] - 1) as f64 } else { 0.0 };
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect();
    let mean = scores.iter().sum::<f64>() / m as f64;
    Ok((scores, mean))
}

/// Mean silhouette of every cut `k` in `2..=min(m, k_max)`.
pub fn silhouette_scan(dendrogram: &Dendrogram, distances: &Matrix, k_max: usize) -> Result<Vec<(usize, f64)>> {
    let m = dendrogram.n_leaves;
    if m < 2 {
        return Err(Error::ClusterCount { k: m, min: 2, max: m });
    }
    if k_max < 2 {
        return Err(Error::InvalidConfig(format!("k_max {k_max} must be at least 2")));
    }
    (2..=m.min(k_max))
        .map(|k| {
            let labels = dendrogram.cut(k)?;
            Ok((k, silhouette(distances, &labels)?.1))
        })
        .collect()
}

/// Picks the first `k` with the maximal score.
pub fn best_k(scores: &[(usize, f64)]) -> Option<(usize, f64)> {
    scores
        .iter()
        .copied()
        .fold(None, |best, (k, s)| match best {
            Some((_, bs)) if s <= bs => best,
            _ => Some((k, s)),
        })
}

/// Cut maximizing the mean silhouette; ties go to the smallest `k`.
pub fn select_k(dendrogram: &Dendrogram, distances: &Matrix, k_max: usize) -> Result<Partition> {
    let scores = silhouette_scan(dendrogram, distances, k_max)?;
    let (k, mean) = best_k(&scores).expect("scan covers at least k = 2");
    Ok(Partition {
        assignment: dendrogram.cut(k)?,
        k,
        mean_silhouette: mean,
    })
}
