//! Pair-counting agreement between an estimated partition and the truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Counts over all unordered subject pairs.
///
/// * `tp`: together in both partitions.
/// * `tn`: apart in both.
/// * `fp`: apart in the truth, together in the estimate.
/// * `fn_`: together in the truth, apart in the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

fn choose2(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// Contingency table between two partitions (rows: truth clusters).
fn contingency(truth: &Partition, estimate: &Partition) -> Vec<Vec<u64>> {
    let mut table = vec![vec![0u64; estimate.num_clusters()]; truth.num_clusters()];
    for (&a, &b) in truth.labels().iter().zip(estimate.labels()) {
        table[a][b] += 1;
    }
    table
}

pub fn pair_counts(truth: &Partition, estimate: &Partition) -> Result<PairCounts> {
    truth.check_same_size(estimate)?;
    let table = contingency(truth, estimate);
    let n = truth.len() as u64;
    let together_both: u64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let together_truth: u64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let together_est: u64 = (0..estimate.num_clusters())
        .map(|c| choose2(table.iter().map(|r| r[c]).sum()))
        .sum();
    let tp = together_both;
    let fn_ = together_truth - tp;
    let fp = together_est - tp;
    let tn = choose2(n) - tp - fn_ - fp;
    Ok(PairCounts { tp, tn, fp, fn_ })
}

fn check_pairs(pc: &PairCounts) -> Result<()> {
    if pc.total() == 0 {
        return Err(Error::InvalidParameter("agreement indexes need at least 2 subjects".into()));
    }
    Ok(())
}

/// `(TP + TN) / (TP + TN + FP + FN)`.
pub fn rand(pc: &PairCounts) -> Result<f64> {
    check_pairs(pc)?;
    Ok((pc.tp + pc.tn) as f64 / pc.total() as f64)
}

/// `TP / (TP + FP + FN)`; 1 when no pair is together in either partition.
pub fn jaccard(pc: &PairCounts) -> Result<f64> {
    check_pairs(pc)?;
    let denom = pc.tp + pc.fp + pc.fn_;
    Ok(if denom == 0 { 1.0 } else { pc.tp as f64 / denom as f64 })
}

/// Hubert–Arabie adjusted Rand index under the permutation model.
///
/// When the expected and maximal indexes coincide (both partitions trivial)
/// the index is 1.
pub fn arand(truth: &Partition, estimate: &Partition) -> Result<f64> {
    truth.check_same_size(estimate)?;
    if truth.len() < 2 {
        return Err(Error::InvalidParameter("agreement indexes need at least 2 subjects".into()));
    }
    let table = contingency(truth, estimate);
    // (index − E) / (max − E) with E = rows·cols/C(n,2), scaled by 2·C(n,2)
    // so everything but the final division is exact integer arithmetic.
    let index: i128 = table.iter().flatten().map(|&c| choose2(c) as i128).sum();
    let rows: i128 = table.iter().map(|r| choose2(r.iter().sum()) as i128).sum();
    let cols: i128 = (0..estimate.num_clusters())
        .map(|c| choose2(table.iter().map(|r| r[c]).sum()) as i128)
        .sum();
    let pairs = choose2(truth.len() as u64) as i128;
    let numerator = 2 * (index * pairs - rows * cols);
    let denominator = (rows + cols) * pairs - 2 * rows * cols;
    if denominator == 0 {
        return Ok(1.0);
    }
    Ok(numerator as f64 / denominator as f64)
}

/// All agreement measures for one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub counts: PairCounts,
    pub rand: f64,
    pub jaccard: f64,
    pub arand: f64,
}

pub fn agreement(truth: &Partition, estimate: &Partition) -> Result<Agreement> {
    let counts = pair_counts(truth, estimate)?;
    Ok(Agreement {
        rand: rand(&counts)?,
        jaccard: jaccard(&counts)?,
        arand: arand(truth, estimate)?,
        counts,
    })
}
