//! Measurement-error correction from repeated measures.
//!
//! With `J` replicates `W_ij = Y_i + U_ij` per subject, the within-subject
//! scatter identifies the error covariance `Σ_U`. Given a working partition,
//! the within-group scatter of single replicates estimates `Σ_W = Σ_ε + Σ_U`,
//! so `Σ_ε = Σ_W − Σ_U` after projection onto the PSD cone. The latent curve
//! is then Gaussian given its surrogate, with mean shrunk from the surrogate
//! toward the group mean, and pseudo-curves are drawn from that law.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::TimeGrid;
use crate::error::{Error, Result};
use crate::fusion::CurveSet;
use crate::linalg::{is_zero, project_psd, sym_sqrt, symmetrize};
use crate::partition::Partition;
use crate::seed;

/// Groups with at least this many members enter the signal-variance estimate
/// and can absorb singletons.
pub const MIN_GROUP_SIZE: usize = 3;

const MAX_CONDITION: f64 = 1e12;
const RIDGE_SCALE: f64 = 1e-8;

/// Which surrogate the latent curve is conditioned on (and the initial
/// clustering is run on).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Surrogate {
    /// Replicate average `W̄_i`; the error covariance of the surrogate is `Σ_U/J`.
    #[default]
    Average,
    /// First replicate `W_i1`; the error covariance is `Σ_U`.
    Single,
}

impl std::str::FromStr for Surrogate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Surrogate::Average),
            "single" => Ok(Surrogate::Single),
            other => Err(Error::InvalidParameter(format!("unknown surrogate mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Surrogate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Surrogate::Average => "average",
            Surrogate::Single => "single",
        })
    }
}

/// Dense `n × J × m` array of replicate curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateArray {
    n: usize,
    j: usize,
    m: usize,
    values: Vec<f64>,
}

impl ReplicateArray {
    /// `curves[i][j]` is replicate `j` of subject `i`.
    pub fn new(curves: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n = curves.len();
        let j = curves.first().map_or(0, |c| c.len());
        let m = curves.first().and_then(|c| c.first()).map_or(0, |c| c.len());
        if n == 0 || j == 0 || m == 0 {
            return Err(Error::Dimension("replicate array needs n, J, m >= 1".into()));
        }
        let mut values = Vec::with_capacity(n * j * m);
        for (i, subject) in curves.iter().enumerate() {
            if subject.len() != j {
                return Err(Error::Dimension(format!("subject {i} has {} replicates, expected {j}", subject.len())));
            }
            for (r, curve) in subject.iter().enumerate() {
                if curve.len() != m {
                    return Err(Error::Dimension(format!(
                        "subject {i} replicate {r} has {} points, expected {m}",
                        curve.len()
                    )));
                }
                if curve.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Dimension(format!("subject {i} replicate {r} has non-finite values")));
                }
                values.extend_from_slice(curve);
            }
        }
        Ok(ReplicateArray { n, j, m, values })
    }

    pub fn subjects(&self) -> usize {
        self.n
    }

    pub fn replicates(&self) -> usize {
        self.j
    }

    pub fn points(&self) -> usize {
        self.m
    }

    pub fn curve(&self, i: usize, j: usize) -> &[f64] {
        let off = (i * self.j + j) * self.m;
        &self.values[off..off + self.m]
    }

    /// `W̄_i = (1/J) Σ_j W_ij`.
    pub fn subject_mean(&self, i: usize) -> DVector<f64> {
        let first = self.curve(i, 0);
        if (1..self.j).all(|j| self.curve(i, j) == first) {
            return DVector::from_column_slice(first);
        }
        let mut mean = DVector::zeros(self.m);
        for j in 0..self.j {
            mean += DVector::from_column_slice(self.curve(i, j));
        }
        mean / self.j as f64
    }

    pub fn surrogate(&self, i: usize, mode: Surrogate) -> DVector<f64> {
        match mode {
            Surrogate::Average => self.subject_mean(i),
            Surrogate::Single => DVector::from_column_slice(self.curve(i, 0)),
        }
    }
}

/// Replicated curves on one common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalDataset {
    grid: TimeGrid,
    ids: Vec<String>,
    array: ReplicateArray,
}

impl FunctionalDataset {
    pub fn new(grid: TimeGrid, ids: Vec<String>, curves: &[Vec<Vec<f64>>]) -> Result<Self> {
        let array = ReplicateArray::new(curves)?;
        if ids.len() != array.subjects() {
            return Err(Error::Dimension(format!("{} ids for {} subjects", ids.len(), array.subjects())));
        }
        if array.points() != grid.len() {
            return Err(Error::Dimension(format!(
                "curves have {} points but the grid has {}",
                array.points(),
                grid.len()
            )));
        }
        Ok(FunctionalDataset { grid, ids, array })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn array(&self) -> &ReplicateArray {
        &self.array
    }

    pub fn subjects(&self) -> usize {
        self.array.subjects()
    }

    pub fn replicates(&self) -> usize {
        self.array.replicates()
    }

    /// One surrogate curve per subject.
    pub fn surrogate_curves(&self, mode: Surrogate) -> Result<CurveSet> {
        let rows: Vec<Vec<f64>> = (0..self.subjects())
            .map(|i| self.array.surrogate(i, mode).as_slice().to_vec())
            .collect();
        CurveSet::on_grid(&self.grid, &self.ids, &rows)
    }

    pub fn curves_from_rows(&self, rows: &DMatrix<f64>) -> Result<CurveSet> {
        let rows: Vec<Vec<f64>> = (0..rows.nrows()).map(|i| rows.row(i).iter().copied().collect()).collect();
        CurveSet::on_grid(&self.grid, &self.ids, &rows)
    }
}

fn outer_acc(acc: &mut DMatrix<f64>, d: &DVector<f64>) {
    acc.ger(1.0, d, d, 1.0);
}

/// Within-subject covariance `Σ_U = 1/(n(J−1)) Σ_i Σ_j (W_ij − W̄_i)(W_ij − W̄_i)ᵀ`.
pub fn estimate_sigma_u(data: &ReplicateArray) -> Result<DMatrix<f64>> {
    if data.replicates() < 2 {
        return Err(Error::NoReplicates);
    }
    let m = data.points();
    let mut acc = DMatrix::zeros(m, m);
    for i in 0..data.subjects() {
        let mean = data.subject_mean(i);
        for j in 0..data.replicates() {
            outer_acc(&mut acc, &(DVector::from_column_slice(data.curve(i, j)) - &mean));
        }
    }
    acc /= (data.subjects() * (data.replicates() - 1)) as f64;
    Ok(symmetrize(&acc))
}

/// Per-replicate within-group covariance averaged over replicates and over
/// groups with at least three members. Returns the estimate and the canonical
/// labels of the groups used.
pub fn estimate_sigma_w(data: &ReplicateArray, partition: &Partition) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if partition.len() != data.subjects() {
        return Err(Error::PartitionMismatch(format!(
            "partition covers {} subjects, data has {}",
            partition.len(),
            data.subjects()
        )));
    }
    let m = data.points();
    let groups = partition.groups();
    let used: Vec<usize> = (0..groups.len()).filter(|&k| groups[k].len() >= MIN_GROUP_SIZE).collect();
    if used.is_empty() {
        return Err(Error::NoLargeGroup);
    }
    let mut total = DMatrix::zeros(m, m);
    for &k in &used {
        let members = &groups[k];
        for j in 0..data.replicates() {
            let mut mean = DVector::zeros(m);
            for &i in members {
                mean += DVector::from_column_slice(data.curve(i, j));
            }
            mean /= members.len() as f64;
            let mut acc = DMatrix::zeros(m, m);
            for &i in members {
                outer_acc(&mut acc, &(DVector::from_column_slice(data.curve(i, j)) - &mean));
            }
            total += acc / (members.len() - 1) as f64;
        }
    }
    total /= (data.replicates() * used.len()) as f64;
    Ok((symmetrize(&total), used))
}

/// `Σ_ε = Σ_W − Σ_U` before and after PSD projection.
#[derive(Debug, Clone)]
pub struct SignalCovariance {
    pub raw: DMatrix<f64>,
    pub projected: DMatrix<f64>,
    pub clipped_eigenvalues: usize,
}

pub fn estimate_sigma_eps(sigma_w: &DMatrix<f64>, sigma_u: &DMatrix<f64>) -> Result<SignalCovariance> {
    if sigma_w.shape() != sigma_u.shape() || !sigma_w.is_square() {
        return Err(Error::Dimension(format!(
            "covariances have shapes {:?} and {:?}",
            sigma_w.shape(),
            sigma_u.shape()
        )));
    }
    let raw = symmetrize(&(sigma_w - sigma_u));
    let proj = project_psd(&raw);
    Ok(SignalCovariance {
        raw,
        projected: proj.matrix,
        clipped_eigenvalues: proj.clipped,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceEstimates {
    pub sigma_u: DMatrix<f64>,
    pub sigma_w: DMatrix<f64>,
    pub sigma_eps: DMatrix<f64>,
    pub raw_sigma_eps: DMatrix<f64>,
    /// Canonical labels of the groups of size ≥ 3.
    pub groups_used: Vec<usize>,
    /// Share of eigenvalues of `Σ_W − Σ_U` that were negative and clipped.
    pub clipped_fraction: f64,
}

pub fn estimate_covariances(data: &ReplicateArray, partition: &Partition) -> Result<CovarianceEstimates> {
    let sigma_u = estimate_sigma_u(data)?;
    let (sigma_w, groups_used) = estimate_sigma_w(data, partition)?;
    let eps = estimate_sigma_eps(&sigma_w, &sigma_u)?;
    Ok(CovarianceEstimates {
        clipped_fraction: eps.clipped_eigenvalues as f64 / data.points() as f64,
        sigma_u,
        sigma_w,
        sigma_eps: eps.projected,
        raw_sigma_eps: eps.raw,
        groups_used,
    })
}

/// Shrinkage `S = Σ_ε(Σ_ε + Σ_U/J)⁻¹` and conditional covariance
/// `Σ̄ = Σ_ε − S Σ_ε` shared by all subjects.
#[derive(Debug, Clone)]
pub struct Shrinkage {
    /// `None` when `Σ_U = 0`: the surrogate is the latent curve.
    matrix: Option<DMatrix<f64>>,
    covariance: DMatrix<f64>,
    /// Ridge added to `Σ_ε + Σ_U/J` before inversion (0 if none).
    pub ridge: f64,
}

impl Shrinkage {
    pub fn new(sigma_eps: &DMatrix<f64>, sigma_u: &DMatrix<f64>, replicates: usize) -> Result<Self> {
        let m = sigma_eps.nrows();
        if sigma_eps.shape() != sigma_u.shape() || !sigma_eps.is_square() {
            return Err(Error::Dimension("Σ_ε and Σ_U must be square of equal size".into()));
        }
        if replicates == 0 {
            return Err(Error::InvalidParameter("replicate count must be >= 1".into()));
        }
        if is_zero(sigma_u) {
            return Ok(Shrinkage {
                matrix: None,
                covariance: DMatrix::zeros(m, m),
                ridge: 0.0,
            });
        }
        let mut total = symmetrize(&(sigma_eps + sigma_u / replicates as f64));
        let eig = SymmetricEigen::new(total.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l)));
        let mut ridge = 0.0;
        if !(lo > 0.0) || hi / lo > MAX_CONDITION {
            ridge = RIDGE_SCALE * total.trace() / m as f64;
            for d in 0..m {
                total[(d, d)] += ridge;
            }
        }
        let chol = total.clone().cholesky().ok_or_else(|| {
            Error::Singular(format!(
                "Σ_ε + Σ_U/J is singular after ridge {ridge:e} (eigenvalues in [{lo:e}, {hi:e}])"
            ))
        })?;
        // S = Σ_ε A⁻¹ = (A⁻¹ Σ_ε)ᵀ for symmetric A.
        let shrink = chol.solve(sigma_eps).transpose();
        let covariance = symmetrize(&(sigma_eps - &shrink * sigma_eps));
        Ok(Shrinkage {
            matrix: Some(shrink),
            covariance,
            ridge,
        })
    }

    /// `S`, or the identity when there is no measurement error.
    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.covariance.nrows();
        self.matrix.clone().unwrap_or_else(|| DMatrix::identity(m, m))
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// `center + S (surrogate − center)`.
    pub fn mean(&self, surrogate: &DVector<f64>, center: &DVector<f64>) -> DVector<f64> {
        match &self.matrix {
            None => surrogate.clone(),
            Some(s) => center + s * (surrogate - center),
        }
    }
}

/// Conditional mean and covariance of the latent curve given one surrogate.
pub fn conditional_params(
    surrogate: &DVector<f64>,
    group_mean: &DVector<f64>,
    sigma_eps: &DMatrix<f64>,
    sigma_u: &DMatrix<f64>,
    replicates: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if surrogate.len() != sigma_eps.nrows() || group_mean.len() != sigma_eps.nrows() {
        return Err(Error::Dimension("curve length does not match covariance size".into()));
    }
    let s = Shrinkage::new(sigma_eps, sigma_u, replicates)?;
    Ok((s.mean(surrogate, group_mean), s.covariance().clone()))
}

/// Pool a singleton toward the nearest group of size ≥ 3.
///
/// `groups` holds every other group's mean and size. With several large
/// groups the weight on the singleton is `d* / Σ d`, the distance to the
/// nearest large group over the summed distances to all of them; with one
/// large group it is ½. Returns the pooled mean and the weight.
pub fn pooled_group_mean(singleton: &DVector<f64>, groups: &[(DVector<f64>, usize)]) -> Result<(DVector<f64>, f64)> {
    let large: Vec<&DVector<f64>> = groups.iter().filter(|(_, s)| *s >= MIN_GROUP_SIZE).map(|(g, _)| g).collect();
    if large.is_empty() {
        return Err(Error::NoLargeGroup);
    }
    let dist: Vec<f64> = large.iter().map(|g| (singleton - *g).norm()).collect();
    let nearest = (0..dist.len()).fold(0, |b, k| if dist[k] < dist[b] { k } else { b });
    let weight = if large.len() == 1 {
        0.5
    } else {
        let total: f64 = dist.iter().sum();
        if total > 0.0 {
            dist[nearest] / total
        } else {
            0.0
        }
    };
    Ok((singleton * weight + large[nearest] * (1.0 - weight), weight))
}

/// Per-subject conditional law shared by one round of pseudo-data.
#[derive(Debug, Clone)]
pub struct ConditionalLaw {
    pub means: Vec<DVector<f64>>,
    pub covariance: DMatrix<f64>,
    pub shrinkage: DMatrix<f64>,
    /// Pooling weight for subjects that formed singleton groups.
    pub pooled: Vec<Option<f64>>,
    pub ridge: f64,
}

/// Conditional law of each latent curve given its surrogate under the working
/// partition. Group means are averages of the replicate means `W̄_i`.
pub fn conditional_law(
    data: &ReplicateArray,
    partition: &Partition,
    estimates: &CovarianceEstimates,
    mode: Surrogate,
) -> Result<ConditionalLaw> {
    if partition.len() != data.subjects() {
        return Err(Error::PartitionMismatch(format!(
            "partition covers {} subjects, data has {}",
            partition.len(),
            data.subjects()
        )));
    }
    let effective_j = match mode {
        Surrogate::Average => data.replicates(),
        Surrogate::Single => 1,
    };
    let shrink = Shrinkage::new(&estimates.sigma_eps, &estimates.sigma_u, effective_j)?;
    let groups = partition.groups();
    let group_means: Vec<(DVector<f64>, usize)> = groups
        .iter()
        .map(|g| {
            let sum = g.iter().fold(DVector::zeros(data.points()), |acc, &i| acc + data.subject_mean(i));
            (sum / g.len() as f64, g.len())
        })
        .collect();

    let mut means = Vec::with_capacity(data.subjects());
    let mut pooled = Vec::with_capacity(data.subjects());
    for i in 0..data.subjects() {
        let k = partition.label(i);
        let (center, weight) = if groups[k].len() == 1 {
            match pooled_group_mean(&group_means[k].0, &group_means) {
                Ok((c, w)) => (c, Some(w)),
                Err(Error::NoLargeGroup) => (group_means[k].0.clone(), None),
                Err(e) => return Err(e),
            }
        } else {
            (group_means[k].0.clone(), None)
        };
        means.push(shrink.mean(&data.surrogate(i, mode), &center));
        pooled.push(weight);
    }
    Ok(ConditionalLaw {
        means,
        covariance: shrink.covariance().clone(),
        shrinkage: shrink.matrix(),
        pooled,
        ridge: shrink.ridge,
    })
}

/// Draw one curve per subject from its conditional law.
///
/// Subject `i` uses ChaCha substream `i` of `seed`, so output does not depend
/// on evaluation order.
pub fn sample_law(law: &ConditionalLaw, seed: u64) -> DMatrix<f64> {
    let m = law.covariance.nrows();
    let n = law.means.len();
    let root = sym_sqrt(&law.covariance);
    let degenerate = is_zero(&root);
    let mut out = DMatrix::zeros(n, m);
    for (i, mean) in law.means.iter().enumerate() {
        let draw = if degenerate {
            mean.clone()
        } else {
            let mut rng = seed::substream(seed, i as u64);
            let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            mean + &root * z
        };
        out.set_row(i, &draw.transpose());
    }
    out
}

/// Pseudo-curves `Y*` (`n × m`) and the law they were drawn from.
pub fn simulate_pseudo(
    data: &ReplicateArray,
    partition: &Partition,
    estimates: &CovarianceEstimates,
    mode: Surrogate,
    seed: u64,
) -> Result<(DMatrix<f64>, ConditionalLaw)> {
    let law = conditional_law(data, partition, estimates, mode)?;
    Ok((sample_law(&law, seed), law))
}
