//! Pairwise-fusion penalized spline clustering.
//!
//! Each subject's curve is fit by a penalized B-spline with coefficients
//! `β_i`; all pairwise differences `β_i − β_j` carry a group minimax concave
//! penalty on their Euclidean norm. Subjects whose coefficient differences are
//! shrunk exactly to zero form a cluster, so the partition and the number of
//! clusters come out of the fit.
//!
//! The objective is minimized by an alternating-direction scheme over the
//! coefficients, slack differences `δ_ij`, and scaled duals `v_ij`
//! (see [`fit_fixed`]). The roughness weight `λ₁` and fusion weight `λ₂` are
//! tuned by a two-step BIC search (see [`select_and_fit`]).

mod admm;
mod bic;
mod clusters;
mod mcp;
mod problem;
mod select;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use admm::{fit_fixed, fit_fixed_warm, AdmmState, FusionFit, Termination};
pub use bic::{bic_lambda1, bic_lambda2, Bic};
pub use clusters::{average_within_clusters, extract_clusters, pair_count, pair_index};
pub use mcp::{mcp_penalty, mcp_threshold};
pub use problem::{objective, Curve, CurveSet, FusionProblem, RidgeFits};
pub use select::{select_and_fit, Lambda1Point, Lambda2Point, Selection};

/// `count` log-spaced values from `lo` to `hi`, inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Candidate roughness weights, ascending.
    pub lambda1_grid: Vec<f64>,
    /// Candidate fusion weights, ascending.
    pub lambda2_grid: Vec<f64>,
    /// MCP concavity `γ > 1`.
    pub mcp_gamma: f64,
    /// Augmented-Lagrangian weight `θ`, with `γθ > 1`.
    pub admm_theta: f64,
    pub max_iterations: usize,
    /// Stop once `max ‖β_i − β_j − δ_ij‖₂` falls to this level.
    pub primal_tolerance: f64,
    /// Pairs with `‖δ_ij‖₂` at or below this are joined.
    pub fuse_tolerance: f64,
    /// Start each `λ₂` from the previous grid point's solution instead of the
    /// ridge fit.
    pub warm_start: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            lambda1_grid: log_grid(1e-4, 1e2, 25),
            lambda2_grid: log_grid(1e-2, 1e1, 30),
            mcp_gamma: 3.0,
            admm_theta: 1.0,
            max_iterations: 1000,
            primal_tolerance: 1e-4,
            fuse_tolerance: 1e-6,
            warm_start: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        validate_solver(self.mcp_gamma, self.admm_theta)?;
        for (name, grid) in [("lambda1_grid", &self.lambda1_grid), ("lambda2_grid", &self.lambda2_grid)] {
            if grid.is_empty() {
                return Err(Error::InvalidParameter(format!("{name} is empty")));
            }
            if grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has a negative or non-finite entry")));
            }
            if grid.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidParameter(format!("{name} is not sorted ascending")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !(self.primal_tolerance > 0.0) {
            return Err(Error::InvalidParameter("primal_tolerance must be > 0".into()));
        }
        if !(self.fuse_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("fuse_tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

pub(crate) fn validate_solver(gamma: f64, theta: f64) -> Result<()> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("MCP gamma must exceed 1, got {gamma}")));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!("ADMM theta must be positive, got {theta}")));
    }
    if !(gamma * theta > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma * theta must exceed 1, got {}",
            gamma * theta
        )));
    }
    Ok(())
}
