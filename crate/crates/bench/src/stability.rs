//! How often each task lands in each cluster across repeated runs.

use rmb_cle::clustering::canonical_labels;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n_runs: usize,
    /// `frequencies[task][label]`, labels aligned to the reference partition.
    /// Columns past the reference's cluster count hold unmatched clusters.
    pub frequencies: Vec<Vec<f64>>,
    /// Number of clusters in the reference partition.
    pub n_reference: usize,
    /// Fraction of runs equal to the ground truth up to relabeling.
    pub exact_recovery: Option<f64>,
}

/// Relabels `run` onto `reference` by greedy maximum overlap. Run clusters
/// left without a partner get fresh labels from `n_reference` upwards.
pub fn match_labels(run: &[usize], reference: &[usize]) -> Vec<usize> {
    let run = canonical_labels(run);
    let reference = canonical_labels(reference);
    let k_run = run.iter().max().map_or(0, |k| k + 1);
    let k_ref = reference.iter().max().map_or(0, |k| k + 1);
    let mut overlap = vec![vec![0usize; k_ref]; k_run];
    for (&a, &b) in run.iter().zip(&reference) {
        overlap[a][b] += 1;
    }
    let mut pairs: Vec<(usize, usize, usize)> = (0..k_run)
        .flat_map(|a| (0..k_ref).map(move |b| (a, b)))
        .filter_map(|(a, b)| (overlap[a][b] > 0).then_some((overlap[a][b], a, b)))
        .collect();
    pairs.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut target = vec![None; k_run];
    let mut taken = vec![false; k_ref];
    for (_, a, b) in pairs {
        if target[a].is_none() && !taken[b] {
            target[a] = Some(b);
            taken[b] = true;
        }
    }
    let mut next = k_ref;
    let target: Vec<usize> = target
        .into_iter()
        .map(|t| {
            t.unwrap_or_else(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    run.iter().map(|&a| target[a]).collect()
}

/// Assignment frequencies over `runs`, matched to `truth` when given and to
/// the first run otherwise.
pub fn stability_report(runs: &[Vec<usize>], truth: Option<&[usize]>) -> Result<StabilityReport> {
    let first = runs.first().ok_or(Error::Empty("stability needs at least one run"))?;
    let m = first.len();
    if let Some((i, r)) = runs.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::Config(format!("run {i} has {} tasks, run 0 has {m}", r.len())));
    }
    if truth.is_some_and(|t| t.len() != m) {
        return Err(Error::Config(format!("ground truth does not cover the {m} tasks")));
    }
    let reference = canonical_labels(truth.unwrap_or(first));
    let n_reference = reference.iter().max().map_or(0, |k| k + 1);
    let matched: Vec<Vec<usize>> = runs.iter().map(|r| match_labels(r, &reference)).collect();
    let width = matched.iter().flatten().max().map_or(0, |k| k + 1).max(n_reference);
    let mut frequencies = vec![vec![0.0; width]; m];
    let share = 1.0 / runs.len() as f64;
    for run in &matched {
        for (t, &c) in run.iter().enumerate() {
            frequencies[t][c] += share;
        }
    }
    let exact_recovery = truth.map(|_| {
        runs.iter().filter(|r| canonical_labels(r) == reference).count() as f64 / runs.len() as f64
    });
    Ok(StabilityReport {
        n_runs: runs.len(),
        frequencies,
        n_reference,
        exact_recovery,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_runs_give_block_pattern() {
        let truth = vec![0, 0, 1, 1, 2];
        let runs = vec![vec![2, 2, 0, 0, 1], vec![0, 0, 1, 1, 2]];
        let r = stability_report(&runs, Some(&truth)).unwrap();
        assert_eq!(r.exact_recovery, Some(1.0));
        for (t, row) in r.frequencies.iter().enumerate() {
            for (c, &f) in row.iter().enumerate() {
                assert_eq!(f, if truth[t] == c { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn unmatched_clusters_get_extra_columns() {
        let truth = [0, 0, 1, 1];
        assert_eq!(match_labels(&[0, 1, 2, 2], &truth), vec![0, 2, 1, 1]);
        let r = stability_report(&[vec![0, 1, 2, 2]], Some(&truth)).unwrap();
        assert_eq!(r.frequencies[1], vec![0.0, 0.0, 1.0]);
        assert_eq!(r.exact_recovery, Some(0.0));
    }

    #[test]
    fn rows_sum_to_one() {
        let runs: Vec<Vec<usize>> = (0..7).map(|s| (0..6).map(|t| (t * 3 + s * 5) % 4).collect()).collect();
        let r = stability_report(&runs, None).unwrap();
        assert!(r.exact_recovery.is_none());
        for row in &r.frequencies {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inconsistent_runs_are_rejected() {
        assert!(stability_report(&[vec![0, 1], vec![0, 1, 1]], None).is_err());
        assert!(stability_report(&[], None).is_err());
        assert!(stability_report(&[vec![0, 1]], Some(&[0])).is_err());
    }
}
