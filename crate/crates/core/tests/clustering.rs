use proptest::prelude::*;
use rmb_cle::clustering::{self, canonical_labels, linkage, select_k, silhouette, upgma, Linkage};
use rmb_cle::similarity::cosine_distances;
use rmb_cle::Matrix;

/// Naive agglomeration: cluster distances are recomputed from the original
/// matrix at every step, as the mean (or max) over member pairs.
fn naive(d: &Matrix, method: Linkage) -> Vec<(usize, usize, f64)> {
    let m = d.rows();
    let mut members: Vec<Option<Vec<usize>>> = (0..m).map(|i| Some(vec![i])).collect();
    let mut merges = Vec::new();
    for _ in 0..m - 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                let (Some(ma), Some(mb)) = (&members[a], &members[b]) else { continue };
                let pairs = ma.iter().flat_map(|&i| mb.iter().map(move |&j| (i, j)));
                let dist = match method {
                    Linkage::Average => pairs.map(|(i, j)| d[(i, j)]).sum::<f64>() / (ma.len() * mb.len()) as f64,
                    Linkage::Complete => pairs.map(|(i, j)| d[(i, j)]).fold(f64::NEG_INFINITY, f64::max),
                };
                if best.is_none_or(|(_, _, bd)| dist < bd) {
                    best = Some((a, b, dist));
                }
            }
        }
        let (a, b, dist) = best.unwrap();
        let mut joined = members[a].take().unwrap();
        joined.extend(members[b].take().unwrap());
        members.push(Some(joined));
        merges.push((a, b, dist));
    }
    merges
}

/// Textbook silhouette over label groups, singletons scoring 1.
fn naive_silhouette(d: &Matrix, labels: &[usize]) -> f64 {
    let m = labels.len();
    let mut total = 0.0;
    for i in 0..m {
        let own: Vec<usize> = (0..m).filter(|&j| j != i && labels[j] == labels[i]).collect();
        let a = if own.is_empty() { 0.0 } else { own.iter().map(|&j| d[(i, j)]).sum::<f64>() / own.len() as f64 };
        let mut b = f64::INFINITY;
        let mut others: Vec<usize> = labels.iter().copied().filter(|&c| c != labels[i]).collect();
        others.sort();
        others.dedup();
        for c in others {
            let group: Vec<usize> = (0..m).filter(|&j| labels[j] == c).collect();
            b = b.min(group.iter().map(|&j| d[(i, j)]).sum::<f64>() / group.len() as f64);
        }
        let s = if a.max(b) > 0.0 { (b - a) / a.max(b) } else { 0.0 };
        total += s;
    }
    total / m as f64
}

/// Flat labels after replaying the first `m - k` naive merges.
fn naive_cut(m: usize, merges: &[(usize, usize, f64)], k: usize) -> Vec<usize> {
    let mut members: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    for &(a, b, _) in &merges[..m - k] {
        let mut joined = std::mem::take(&mut members[a]);
        joined.extend(std::mem::take(&mut members[b]));
        members.push(joined);
    }
    let mut labels = vec![0; m];
    for (c, group) in members.iter().enumerate() {
        for &t in group {
            labels[t] = c;
        }
    }
    canonical_labels(&labels)
}

fn distance_matrix() -> impl Strategy<Value = Matrix> {
    (2usize..=7).prop_flat_map(|m| {
        proptest::collection::vec(0.0f64..1.0, m * m).prop_map(move |v| {
            let raw = Matrix::from_vec(m, m, v).unwrap();
            Matrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { 0.5 * (raw[(i, j)] + raw[(j, i)]) })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn agrees_with_naive_agglomeration(d in distance_matrix()) {
        let m = d.rows();
        for method in [Linkage::Average, Linkage::Complete] {
            let fast = linkage(&d, method).unwrap();
            let slow = naive(&d, method);
            for (f, s) in fast.merges.iter().zip(&slow) {
                prop_assert_eq!((f.left, f.right), (s.0, s.1));
                prop_assert!((f.distance - s.2).abs() < 1e-12);
            }
        }
        let dn = upgma(&d).unwrap();
        let k_max = m;
        let slow = naive(&d, Linkage::Average);
        let mut best = (0, f64::NEG_INFINITY);
        for k in 2..=k_max {
            let s = naive_silhouette(&d, &naive_cut(m, &slow, k));
            if s > best.1 + 1e-12 {
                best = (k, s);
            }
        }
        let p = select_k(&dn, &d, k_max).unwrap();
        prop_assert_eq!(p.k, best.0);
        prop_assert_eq!(p.assignment, naive_cut(m, &slow, best.0));
    }

    #[test]
    fn silhouette_matches_textbook(d in distance_matrix(), seed in any::<u64>()) {
        let m = d.rows();
        let labels: Vec<usize> = (0..m).map(|i| ((seed >> (i * 3)) % 3) as usize).collect();
        let distinct = { let mut l = labels.clone(); l.sort(); l.dedup(); l.len() };
        prop_assume!(distinct >= 2);
        let (phi, mean) = silhouette(&d, &labels).unwrap();
        prop_assert!((mean - naive_silhouette(&d, &labels)).abs() < 1e-12);
        prop_assert!(phi.iter().all(|p| (-1.0..=1.0).contains(p)));
    }

    #[test]
    fn cuts_are_nested(d in distance_matrix()) {
        let dn = upgma(&d).unwrap();
        let m = d.rows();
        for k in 1..m {
            let coarse = dn.cut(k).unwrap();
            let fine = dn.cut(k + 1).unwrap();
            prop_assert_eq!(coarse.iter().max().unwrap() + 1, k);
            for i in 0..m {
                for j in 0..m {
                    if fine[i] == fine[j] {
                        prop_assert_eq!(coarse[i], coarse[j]);
                    }
                }
            }
        }
        prop_assert!(dn.merges.windows(2).all(|w| w[0].distance <= w[1].distance + 1e-12));
    }

    #[test]
    fn partition_is_permutation_invariant(d in distance_matrix(), shift in 0usize..7) {
        let m = d.rows();
        let perm: Vec<usize> = (0..m).map(|i| (i + shift) % m).collect();
        let permuted = Matrix::from_fn(m, m, |i, j| d[(perm[i], perm[j])]);
        let k_max = m;
        let a = select_k(&upgma(&d).unwrap(), &d, k_max).unwrap();
        let b = select_k(&upgma(&permuted).unwrap(), &permuted, k_max).unwrap();
        let mut back = vec![0; m];
        for i in 0..m {
            back[perm[i]] = b.assignment[i];
        }
        prop_assert!(a.same_grouping(&back));
    }

    #[test]
    fn cosine_distances_are_valid_and_scale_free(
        v in proptest::collection::vec(0.01f64..100.0, 16),
        scale in 0.001f64..1000.0,
    ) {
        let s = Matrix::from_vec(4, 4, v).unwrap();
        let d = cosine_distances(&s).unwrap();
        clustering::validate_distances(&d).unwrap();
        prop_assert!(d.as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
        let scaled = Matrix::from_fn(4, 4, |i, j| scale * s[(i, j)]);
        let d2 = cosine_distances(&scaled).unwrap();
        for (a, b) in d.as_slice().iter().zip(d2.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
