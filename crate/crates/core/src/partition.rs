use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cluster membership for `n` subjects.
///
/// Labels are kept canonical: clusters are numbered `0..k` in order of first
/// appearance, so two partitions that group subjects the same way compare equal
/// regardless of how they were labelled.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    num_clusters: usize,
}

impl Partition {
    pub fn from_labels<L, I>(labels: I) -> Self
    where
        L: Eq + std::hash::Hash + Clone,
        I: IntoIterator<Item = L>,
    {
        let mut seen = std::collections::HashMap::new();
        let labels: Vec<usize> = labels
            .into_iter()
            .map(|l| {
                let next = seen.len();
                *seen.entry(l).or_insert(next)
            })
            .collect();
        Partition {
            num_clusters: seen.len(),
            labels,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_labels(0..n)
    }

    pub fn single_cluster(n: usize) -> Self {
        Self::from_labels(std::iter::repeat_n(0usize, n))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, subject: usize) -> usize {
        self.labels[subject]
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    /// Members of each cluster, indexed by canonical label.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Number of subjects whose co-membership differs from `other`: a subject
    /// counts as moved when the set of subjects sharing its cluster changes.
    pub fn moved_subjects(&self, other: &Partition) -> Result<usize> {
        self.check_same_size(other)?;
        let a = self.groups();
        let b = other.groups();
        Ok((0..self.len())
            .filter(|&i| a[self.labels[i]] != b[other.labels[i]])
            .count())
    }

    pub(crate) fn check_same_size(&self, other: &Partition) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::PartitionMismatch(format!(
                "partitions cover {} and {} subjects",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_relabelling() {
        let a = Partition::from_labels([7, 7, 3, 9, 3]);
        let b = Partition::from_labels(["x", "x", "y", "z", "y"]);
        assert_eq!(a, b);
        assert_eq!(a.labels(), &[0, 0, 1, 2, 1]);
        assert_eq!(a.num_clusters(), 3);
        assert_eq!(a.sizes(), vec![2, 2, 1]);
    }

    #[test]
    fn moved_subjects_counts_changed_co_membership() {
        let a = Partition::from_labels([0, 0, 1, 1]);
        let b = Partition::from_labels([0, 0, 1, 2]);
        assert_eq!(a.moved_subjects(&b).unwrap(), 2);
        assert_eq!(a.moved_subjects(&a).unwrap(), 0);
        assert!(a.moved_subjects(&Partition::singletons(3)).is_err());
    }
}
