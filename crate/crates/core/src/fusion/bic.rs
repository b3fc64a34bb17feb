use serde::{Deserialize, Serialize};

use super::admm::FusionFit;
use super::problem::FusionProblem;
use crate::error::Result;

/// Residual sums of squares at round-off level relative to `‖y‖²` count as zero.
const ZERO_RESIDUAL: f64 = 1e-24;

fn log_rss(rss: f64, yss: f64, count: f64) -> f64 {
    if rss <= ZERO_RESIDUAL * yss {
        f64::NEG_INFINITY
    } else {
        (rss / count).ln()
    }
}

/// A BIC value. A zero residual sum of squares gives `−∞`, flagged as
/// degenerate (the fit interpolates the data).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bic {
    pub value: f64,
    pub degenerate: bool,
}

impl Bic {
    fn from_value(value: f64) -> Self {
        Bic {
            value,
            degenerate: value == f64::NEG_INFINITY,
        }
    }
}

/// `Σ_i { log(‖y_i − f̂_i‖²/n_i) + log(n_i)/n_i · df_i }` for the unfused
/// penalized fits at `λ₁`.
pub fn bic_lambda1(problem: &FusionProblem, lambda1: f64) -> Result<Bic> {
    let fits = problem.ridge_fits(lambda1)?;
    let value = (0..problem.n())
        .map(|i| {
            let ni = problem.response(i).len() as f64;
            log_rss(fits.rss[i], problem.response(i).norm_squared(), ni) + ni.ln() / ni * fits.df[i]
        })
        .sum();
    Ok(Bic::from_value(value))
}

/// `log(Σ_i‖y_i − f̂_i‖²/N) + log(N)·df/N` with `df = (K̂/n) Σ_i df_i`.
pub fn bic_lambda2(problem: &FusionProblem, fit: &FusionFit) -> Result<Bic> {
    let df = problem.ridge_fits(fit.lambda1)?.df;
    let rss: f64 = (0..problem.n())
        .map(|i| problem.residual_ss(i, fit.beta.row(i).transpose().as_slice()))
        .sum();
    let yss: f64 = (0..problem.n()).map(|i| problem.response(i).norm_squared()).sum();
    let rss = if rss <= ZERO_RESIDUAL * yss { 0.0 } else { rss };
    Ok(Bic::from_value(bic2_value(
        rss,
        problem.total_observations(),
        fit.k_hat,
        problem.n(),
        df.iter().sum(),
    )))
}

pub(crate) fn bic2_value(rss: f64, total_obs: usize, k_hat: usize, n: usize, sum_df: f64) -> f64 {
    let big_n = total_obs as f64;
    let df = k_hat as f64 / n as f64 * sum_df;
    (rss / big_n).ln() + big_n.ln() * df / big_n
}
