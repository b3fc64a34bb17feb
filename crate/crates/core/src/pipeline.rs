//! The iterated correction loop.
//!
//! 1. Cluster the surrogates (replicate averages or first replicates).
//! 2. Estimate `Σ_U` and `Σ_W` under the current partition.
//! 3. Draw pseudo-curves from the conditional law of each latent curve.
//! 4. Re-cluster the pseudo-curves.
//! 5. Repeat 2–4 until membership stops changing, or the selected BIC rises
//!    relative to the previous correction pass (the previous pass is then
//!    returned), or the iteration budget runs out.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::SplineConfig;
use crate::error::{Error, Result};
use crate::errorcorr::{estimate_covariances, simulate_pseudo, FunctionalDataset, Surrogate};
use crate::fusion::{select_and_fit, FusionConfig, FusionFit, FusionProblem};
use crate::partition::Partition;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub initial_mode: Surrogate,
    pub max_outer_iterations: usize,
    pub seed: u64,
    pub fusion: FusionConfig,
    pub spline: SplineConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            initial_mode: Surrogate::Average,
            max_outer_iterations: 10,
            seed: 0,
            fusion: FusionConfig::default(),
            spline: SplineConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidParameter("max_outer_iterations must be >= 1".into()));
        }
        self.fusion.validate()?;
        self.spline.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MembershipStable,
    BicIncrease,
    MaxIterations,
    /// No group of size ≥ 3 to estimate the signal covariance from.
    CovarianceFallback,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::MembershipStable => "membership-stable",
            StopReason::BicIncrease => "bic-increase",
            StopReason::MaxIterations => "max-iterations",
            StopReason::CovarianceFallback => "covariance-fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 0 is the initial clustering.
    pub iteration: usize,
    pub partition: Partition,
    pub k_hat: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub bic2: f64,
    /// Subjects whose co-membership changed relative to the previous entry.
    pub membership_changes: usize,
    /// Share of clipped eigenvalues in `Σ_W − Σ_U` (correction passes only).
    pub clipped_fraction: Option<f64>,
    pub stop: Option<StopReason>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn stop_reason(&self) -> Option<StopReason> {
        self.records.last().and_then(|r| r.stop)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub partition: Partition,
    pub fit: FusionFit,
    /// Iteration whose result is returned (0 = initial clustering).
    pub returned_iteration: usize,
    pub trace: IterationTrace,
    pub initial: FusionFit,
    /// Pseudo-curves behind the returned fit, if it came from a correction pass.
    pub pseudo: Option<DMatrix<f64>>,
}

fn record(iteration: usize, fit: &FusionFit, changes: usize, clipped: Option<f64>) -> IterationRecord {
    IterationRecord {
        iteration,
        partition: fit.partition.clone(),
        k_hat: fit.k_hat,
        lambda1: fit.lambda1,
        lambda2: fit.lambda2,
        bic2: fit.bic2.map_or(f64::NAN, |b| b.value),
        membership_changes: changes,
        clipped_fraction: clipped,
        stop: None,
        warning: None,
    }
}

/// Cluster the chosen surrogate curves.
pub fn initial_cluster(data: &FunctionalDataset, config: &PipelineConfig) -> Result<FusionFit> {
    let curves = data.surrogate_curves(config.initial_mode)?;
    let problem = FusionProblem::new(&curves, &config.spline)?;
    select_and_fit(&problem, &config.fusion)
}

pub fn run(data: &FunctionalDataset, config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    if data.replicates() < 2 {
        return Err(Error::NoReplicates);
    }
    let initial = initial_cluster(data, config)?;
    let mut trace = IterationTrace {
        records: vec![record(0, &initial, 0, None)],
    };

    let mut returned = (0usize, initial.clone(), None::<DMatrix<f64>>);
    let mut previous_partition = initial.partition.clone();
    let mut previous_bic: Option<f64> = None;

    for r in 1..=config.max_outer_iterations {
        let estimates = match estimate_covariances(data.array(), &previous_partition) {
            Ok(e) => e,
            Err(Error::NoLargeGroup) => {
                let msg = format!(
                    "iteration {r}: no cluster of size >= 3 to estimate Σ_ε; returning iteration {}",
                    returned.0
                );
                warn!("{msg}");
                let last = trace.records.last_mut().expect("trace is nonempty");
                last.stop = Some(StopReason::CovarianceFallback);
                last.warning = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        let (pseudo, _) = simulate_pseudo(
            data.array(),
            &previous_partition,
            &estimates,
            config.initial_mode,
            seed::derive(config.seed, r as u64),
        )?;
        let curves = data.curves_from_rows(&pseudo)?;
        let problem = FusionProblem::new(&curves, &config.spline)?;
        let fit = select_and_fit(&problem, &config.fusion)?;
        let bic = fit.bic2.map_or(f64::NAN, |b| b.value);
        let changes = fit.partition.moved_subjects(&previous_partition)?;
        let mut rec = record(r, &fit, changes, Some(estimates.clipped_fraction));

        if previous_bic.is_some_and(|prev| bic > prev) {
            rec.stop = Some(StopReason::BicIncrease);
            trace.records.push(rec);
            break;
        }
        let stable = fit.partition == previous_partition;
        if stable {
            rec.stop = Some(StopReason::MembershipStable);
        } else if r == config.max_outer_iterations {
            rec.stop = Some(StopReason::MaxIterations);
        }
        trace.records.push(rec);
        previous_partition = fit.partition.clone();
        previous_bic = Some(bic);
        returned = (r, fit, Some(pseudo));
        if stable {
            break;
        }
    }

    let (returned_iteration, fit, pseudo) = returned;
    Ok(PipelineOutcome {
        partition: fit.partition.clone(),
        fit,
        returned_iteration,
        trace,
        initial,
        pseudo,
    })
}
