use log::warn;
use serde::{Deserialize, Serialize};

use super::admm::{fit_fixed_warm, FusionFit};
use super::bic::{bic_lambda1, bic_lambda2, Bic};
use super::problem::FusionProblem;
use super::FusionConfig;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambda1Point {
    pub lambda1: f64,
    pub bic: Bic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambda2Point {
    pub lambda2: f64,
    pub k_hat: usize,
    pub bic: Bic,
    pub iterations: usize,
}

/// BIC paths from the two-step search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub lambda1_path: Vec<Lambda1Point>,
    pub lambda2_path: Vec<Lambda2Point>,
}

/// Index of the smallest value; ties keep the earliest (smallest λ).
fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, v) in values.enumerate() {
        if v < best.1 || (k == 0 && v.is_nan()) {
            best = (k, v);
        }
    }
    best.0
}

/// Two-step tuning: pick `λ₁` by [`bic_lambda1`] with no fusion, then sweep
/// the ascending `λ₂` grid (optionally warm-started) and keep the fit minimizing
/// [`bic_lambda2`].
pub fn select_and_fit(problem: &FusionProblem, config: &FusionConfig) -> Result<FusionFit> {
    config.validate()?;
    let lambda1_path = config
        .lambda1_grid
        .iter()
        .map(|&lambda1| Ok(Lambda1Point { lambda1, bic: bic_lambda1(problem, lambda1)? }))
        .collect::<Result<Vec<_>>>()?;
    let best1 = argmin(lambda1_path.iter().map(|p| p.bic.value));
    let lambda1 = lambda1_path[best1].lambda1;
    if lambda1_path[best1].bic.degenerate {
        warn!("BIC(λ₁) is degenerate (zero residual) at λ₁ = {lambda1}; keeping the smallest such λ₁");
    }

    let mut best: Option<FusionFit> = None;
    let mut lambda2_path = Vec::with_capacity(config.lambda2_grid.len());
    let mut warm = None;
    for &lambda2 in &config.lambda2_grid {
        let mut fit = fit_fixed_warm(problem, lambda1, lambda2, config, warm.as_ref())?;
        let bic = bic_lambda2(problem, &fit)?;
        fit.bic2 = Some(bic);
        lambda2_path.push(Lambda2Point {
            lambda2,
            k_hat: fit.k_hat,
            bic,
            iterations: fit.iterations,
        });
        if config.warm_start {
            warm = Some(fit.state.clone());
        }
        let better = match &best {
            None => true,
            Some(b) => bic.value < b.bic2.map_or(f64::INFINITY, |x| x.value),
        };
        if better {
            best = Some(fit);
        }
    }
    let mut fit = best.expect("lambda2 grid is nonempty");
    if fit.bic2.is_some_and(|b| b.degenerate) {
        warn!("BIC(λ₂) is degenerate (zero residual) at λ₂ = {}", fit.lambda2);
    }
    fit.bic1 = Some(lambda1_path[best1].bic);
    fit.selection = Some(Selection {
        lambda1_path,
        lambda2_path,
    });
    Ok(fit)
}
