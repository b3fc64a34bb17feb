//! Clustering of functional data observed with measurement error.
//!
//! Curves are approximated by penalized B-splines and grouped by a pairwise
//! fusion penalty (minimax concave) on the spline coefficients, so the number
//! of clusters is chosen by the fit itself. When each subject is observed
//! through several error-prone replicates, the error covariance is estimated
//! from the replicates and the clustering is repeated on pseudo-curves drawn
//! from the conditional law of the latent curve given the observations.
//!
//! Module map:
//!
//! * [`basis`]: B-spline design matrices and difference penalties.
//! * [`fusion`]: the fusion-penalized fit, its solver, and BIC tuning.
//! * [`errorcorr`]: covariance estimation and pseudo-curve simulation.
//! * [`pipeline`]: the iterated correct-and-recluster loop.
//! * [`metrics`]: pair-counting agreement indexes.
//! * [`simbench`]: synthetic two-group scenarios and replicated comparisons.

pub mod basis;
pub mod errorcorr;
mod error;
pub mod fusion;
pub mod linalg;
pub mod metrics;
mod partition;
pub mod pipeline;
pub mod seed;
pub mod simbench;

pub use basis::{build_design, difference_penalty, SplineConfig, SplineDesign, TimeGrid};
pub use error::{Error, Result};
pub use errorcorr::{CovarianceEstimates, FunctionalDataset, Surrogate};
pub use fusion::{select_and_fit, CurveSet, FusionConfig, FusionFit, FusionProblem};
pub use metrics::{agreement, Agreement, PairCounts};
pub use partition::Partition;
pub use pipeline::{IterationTrace, PipelineConfig, PipelineOutcome, StopReason};
pub use simbench::{Method, ScenarioConfig, SyntheticDataset};


