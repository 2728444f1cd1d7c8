//! Average ranks of methods across tasks.

use crate::error::{Error, Result};

/// Mean rank of each method over tasks, 1 being best; tied methods share the
/// average of the ranks they span.
///
/// `values[i][t]` is method `i`'s score on task `t`.
pub fn average_ranks(methods: &[String], values: &[Vec<Option<f64>>], higher_is_better: bool) -> Result<Vec<f64>> {
    if methods.is_empty() {
        return Err(Error::Empty("no methods to rank"));
    }
    if values.len() != methods.len() {
        return Err(Error::Config(format!("{} methods but {} score rows", methods.len(), values.len())));
    }
    let n_tasks = values.iter().map(Vec::len).max().unwrap_or(0);
    if n_tasks == 0 {
        return Err(Error::Empty("no tasks to rank over"));
    }
    let mut table = vec![vec![0.0; n_tasks]; methods.len()];
    for (i, row) in values.iter().enumerate() {
        for t in 0..n_tasks {
            match row.get(t).copied().flatten() {
                Some(v) if !v.is_nan() => table[i][t] = if higher_is_better { -v } else { v },
                _ => {
                    return Err(Error::MissingCell {
                        method: methods[i].clone(),
                        task: t,
                    })
                }
            }
        }
    }
    let mut sums = vec![0.0; methods.len()];
    for t in 0..n_tasks {
        let mut order: Vec<usize> = (0..methods.len()).collect();
        order.sort_by(|&a, &b| table[a][t].total_cmp(&table[b][t]));
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && table[order[end]][t] == table[order[start]][t] {
                end += 1;
            }
            // Positions start..end hold ranks start+1..=end.
            let shared = (start + 1 + end) as f64 / 2.0;
            for &i in &order[start..end] {
                sums[i] += shared;
            }
            start = end;
        }
    }
    Ok(sums.into_iter().map(|s| s / n_tasks as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn dominant_method_ranks_first() {
        let v = vec![vec![Some(0.9), Some(0.8)], vec![Some(0.5), Some(0.1)]];
        assert_eq!(average_ranks(&names(2), &v, true).unwrap(), vec![1.0, 2.0]);
        assert_eq!(average_ranks(&names(2), &v, false).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn tie_on_one_task_splits_ranks() {
        let v = vec![vec![Some(0.9), Some(0.5)], vec![Some(0.1), Some(0.5)]];
        assert_eq!(average_ranks(&names(2), &v, true).unwrap(), vec![1.25, 1.75]);
    }

    #[test]
    fn ranks_sum_to_constant() {
        let v = vec![
            vec![Some(1.0), Some(3.0), Some(2.0)],
            vec![Some(1.0), Some(2.0), Some(5.0)],
            vec![Some(0.0), Some(3.0), Some(2.0)],
            vec![Some(4.0), Some(1.0), Some(2.0)],
        ];
        let r = average_ranks(&names(4), &v, true).unwrap();
        assert!((r.iter().sum::<f64>() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn missing_cell_is_an_error() {
        let v = vec![vec![Some(1.0), None], vec![Some(2.0), Some(1.0)]];
        assert!(matches!(
            average_ranks(&names(2), &v, true),
            Err(Error::MissingCell { task: 1, .. })
        ));
        let short = vec![vec![Some(1.0)], vec![Some(2.0), Some(1.0)]];
        assert!(average_ranks(&names(2), &short, true).is_err());
    }
}
