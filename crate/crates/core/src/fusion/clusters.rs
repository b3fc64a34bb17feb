use nalgebra::DMatrix;

use crate::partition::Partition;

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j`, in lexicographic pair order.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so component ids do not depend on edge order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the graph joining pairs whose slack difference
/// norm is at most `fuse_tolerance`. `delta_norms` is in [`pair_index`] order.
pub fn extract_clusters(n: usize, delta_norms: &[f64], fuse_tolerance: f64) -> Partition {
    assert_eq!(delta_norms.len(), pair_count(n), "one norm per pair expected");
    let mut sets = DisjointSets::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if delta_norms[pair_index(n, i, j)] <= fuse_tolerance {
                sets.union(i, j);
            }
        }
    }
    Partition::from_labels((0..n).map(|i| sets.find(i)).collect::<Vec<_>>())
}

/// Replace each row of `beta` by the mean of the rows in its cluster.
pub fn average_within_clusters(beta: &DMatrix<f64>, partition: &Partition) -> DMatrix<f64> {
    let mut out = beta.clone();
    for group in partition.groups() {
        let mut mean = beta.row(group[0]).into_owned();
        for &i in &group[1..] {
            mean += beta.row(i);
        }
        mean /= group.len() as f64;
        for &i in &group {
            out.set_row(i, &mean);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pair_index_is_dense() {
        let n = 7;
        let mut seen = vec![false; pair_count(n)];
        for i in 0..n {
            for j in (i + 1)..n {
                let k = pair_index(n, i, j);
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn all_zero_is_one_cluster() {
        let p = extract_clusters(4, &[0.0; 6], 1e-6);
        assert_eq!(p.num_clusters(), 1);
    }

    #[test]
    fn all_large_is_singletons() {
        let p = extract_clusters(4, &[1.0; 6], 1e-6);
        assert_eq!(p.num_clusters(), 4);
    }

    #[test]
    fn transitive_closure() {
        // Pairs in order (0,1), (0,2), (1,2).
        let p = extract_clusters(3, &[0.0, 5.0, 0.0], 1e-6);
        assert_eq!(p.num_clusters(), 1);
    }

    #[test]
    fn averaging() {
        let beta = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 9.0, 9.0]);
        let p = Partition::from_labels([0, 0, 1]);
        let avg = average_within_clusters(&beta, &p);
        assert_eq!(avg, DMatrix::from_row_slice(3, 2, &[2.0, 3.0, 2.0, 3.0, 9.0, 9.0]));
    }

    proptest! {
        #[test]
        fn permutation_equivariance(
            edges in proptest::collection::vec(proptest::bool::ANY, 15),
            perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let n = 6;
            let norms: Vec<f64> = edges.iter().map(|&e| if e { 0.0 } else { 1.0 }).collect();
            let p = extract_clusters(n, &norms, 1e-6);
            // Subject perm[a] in the permuted problem is subject a originally.
            let mut permuted = vec![1.0; 15];
            for a in 0..n {
                for b in (a + 1)..n {
                    let (x, y) = (perm[a].min(perm[b]), perm[a].max(perm[b]));
                    permuted[pair_index(n, x, y)] = norms[pair_index(n, a, b)];
                }
            }
            let q = extract_clusters(n, &permuted, 1e-6);
            for a in 0..n {
                for b in 0..n {
                    prop_assert_eq!(p.label(a) == p.label(b), q.label(perm[a]) == q.label(perm[b]));
                }
            }
        }
    }
}
