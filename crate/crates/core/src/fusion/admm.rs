use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::bic::Bic;
use super::clusters::{average_within_clusters, extract_clusters, pair_count};
use super::mcp::threshold_in_place;
use super::problem::{objective_rows, FusionProblem};
use super::select::Selection;
use super::FusionConfig;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Why the alternating scheme stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

/// Solver iterate: coefficients, slack differences, scaled duals.
/// Buffers are row-major, `n × J_n` and `pairs × J_n`.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub dual: Vec<f64>,
}

impl AdmmState {
    /// Ridge-fit start: `δ_ij = β_i − β_j`, `v_ij = 0`.
    pub fn from_ridge(problem: &FusionProblem, lambda1: f64) -> Result<Self> {
        let fits = problem.ridge_fits(lambda1)?;
        let n = problem.n();
        let p = problem.dim();
        let beta: Vec<f64> = (0..n).flat_map(|i| fits.beta.row(i).iter().copied().collect::<Vec<_>>()).collect();
        let mut delta = vec![0.0; pair_count(n) * p];
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                for l in 0..p {
                    delta[k * p + l] = beta[i * p + l] - beta[j * p + l];
                }
                k += 1;
            }
        }
        Ok(AdmmState {
            beta,
            dual: vec![0.0; delta.len()],
            delta,
        })
    }

    fn matches(&self, n: usize, p: usize) -> bool {
        self.beta.len() == n * p && self.delta.len() == pair_count(n) * p && self.dual.len() == self.delta.len()
    }

    pub fn delta_norms(&self, p: usize) -> Vec<f64> {
        self.delta.chunks(p).map(|d| d.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FusionFit {
    /// `n × J_n`; rows within a cluster are replaced by the cluster mean.
    pub beta: DMatrix<f64>,
    pub partition: Partition,
    pub k_hat: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub objective_trace: Vec<f64>,
    pub primal_residual_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub bic1: Option<Bic>,
    pub bic2: Option<Bic>,
    pub selection: Option<Selection>,
    pub state: AdmmState,
}

impl FusionFit {
    /// Fitted curve `B_i β_i` for subject `i`.
    pub fn fitted(&self, problem: &FusionProblem, i: usize) -> DVector<f64> {
        problem.fitted(i, self.beta.row(i).transpose().as_slice())
    }

    pub fn final_primal_residual(&self) -> f64 {
        self.primal_residual_trace.last().copied().unwrap_or(0.0)
    }
}

/// Linear solver for the coefficient update
/// `(M_i + nθ I) β_i − θ Σ_j β_j = rhs_i`, `M_i = B_iᵀB_i + λ₁D`.
enum CoefficientSolver {
    /// All subjects share `M`: the subject mean solves `M β̄ = mean(rhs)`, and
    /// then `(M + nθI) β_i = rhs_i + nθ β̄`.
    Shared {
        mean: Cholesky<f64, Dyn>,
        shifted: Cholesky<f64, Dyn>,
    },
    /// Full `nJ_n × nJ_n` system.
    Coupled(Cholesky<f64, Dyn>),
}

impl CoefficientSolver {
    fn new(problem: &FusionProblem, lambda1: f64, theta: f64) -> Result<Self> {
        let n = problem.n();
        let p = problem.dim();
        if problem.shared_design() {
            let mean = problem.regularized_factor(0, lambda1)?;
            let shifted = problem.design_gram(0) + problem.penalty() * lambda1
                + DMatrix::<f64>::identity(p, p) * (n as f64 * theta);
            let shifted = Cholesky::new(shifted)
                .ok_or_else(|| Error::Singular("shifted coefficient system is not positive definite".into()))?;
            return Ok(CoefficientSolver::Shared { mean, shifted });
        }
        let mut big = DMatrix::zeros(n * p, n * p);
        for i in 0..n {
            let block = problem.gram(i) + problem.penalty() * lambda1;
            for a in 0..p {
                for b in 0..p {
                    big[(i * p + a, i * p + b)] = block[(a, b)];
                }
                big[(i * p + a, i * p + a)] += theta * (n as f64 - 1.0);
                for j in 0..n {
                    if j != i {
                        big[(i * p + a, j * p + a)] = -theta;
                    }
                }
            }
        }
        // The pair coupling only adds a PSD term, so a failure here means some
        // subject's own system is singular; report the first such subject.
        Cholesky::new(big).map(CoefficientSolver::Coupled).ok_or_else(|| {
            let bad = (0..problem.num_designs())
                .find(|&d| problem.regularized_factor(d, lambda1).is_err())
                .map(|d| format!("design {d}"))
                .unwrap_or_else(|| "the coupled system".into());
            Error::Singular(format!(
                "coefficient system is singular at λ₁ = {lambda1} ({bad}); use λ₁ > 0 or more grid points"
            ))
        })
    }

    fn solve(&self, rhs: &[f64], n: usize, p: usize, theta: f64, out: &mut [f64]) {
        match self {
            CoefficientSolver::Shared { mean, shifted } => {
                let mut avg = DVector::zeros(p);
                for i in 0..n {
                    for l in 0..p {
                        avg[l] += rhs[i * p + l];
                    }
                }
                avg /= n as f64;
                let center = mean.solve(&avg) * (n as f64 * theta);
                for i in 0..n {
                    let mut r = DVector::from_column_slice(&rhs[i * p..(i + 1) * p]);
                    r += &center;
                    let b = shifted.solve(&r);
                    out[i * p..(i + 1) * p].copy_from_slice(b.as_slice());
                }
            }
            CoefficientSolver::Coupled(chol) => {
                let b = chol.solve(&DVector::from_column_slice(rhs));
                out.copy_from_slice(b.as_slice());
            }
        }
    }
}

/// Fit at one `(λ₁, λ₂)` from the ridge start.
pub fn fit_fixed(problem: &FusionProblem, lambda1: f64, lambda2: f64, config: &FusionConfig) -> Result<FusionFit> {
    fit_fixed_warm(problem, lambda1, lambda2, config, None)
}

/// Fit at one `(λ₁, λ₂)`, optionally continuing from a previous iterate.
///
/// Each iteration: solve the coupled ridge system for `β`; set
/// `δ_ij ← mcp_threshold(β_i − β_j + v_ij/θ)`; update
/// `v_ij ← v_ij + θ(β_i − β_j − δ_ij)`. Stops when the largest primal
/// residual `‖β_i − β_j − δ_ij‖₂` reaches `primal_tolerance` or after
/// `max_iterations`.
pub fn fit_fixed_warm(
    problem: &FusionProblem,
    lambda1: f64,
    lambda2: f64,
    config: &FusionConfig,
    warm: Option<&AdmmState>,
) -> Result<FusionFit> {
    super::validate_solver(config.mcp_gamma, config.admm_theta)?;
    if !(lambda1 >= 0.0) || !(lambda2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tuning parameters must be nonnegative, got λ₁ = {lambda1}, λ₂ = {lambda2}"
        )));
    }
    let n = problem.n();
    let p = problem.dim();
    let theta = config.admm_theta;
    let gamma = config.mcp_gamma;

    let mut state = match warm {
        Some(s) if s.matches(n, p) => s.clone(),
        Some(_) => return Err(Error::Dimension("warm-start state does not match the problem".into())),
        None => AdmmState::from_ridge(problem, lambda1)?,
    };
    let solver = CoefficientSolver::new(problem, lambda1, theta)?;

    let mut objective_trace = Vec::new();
    let mut primal_residual_trace = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut rhs = vec![0.0; n * p];
    let mut z = vec![0.0; p];
    let mut iterations = 0;

    for _ in 0..config.max_iterations {
        iterations += 1;

        // β-step: rhs_i = B_iᵀy_i + Σ_{j>i}(θδ_ij − v_ij) − Σ_{j<i}(θδ_ji − v_ji).
        for i in 0..n {
            rhs[i * p..(i + 1) * p].copy_from_slice(problem.cross(i).as_slice());
        }
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                for l in 0..p {
                    let a = theta * state.delta[k * p + l] - state.dual[k * p + l];
                    rhs[i * p + l] += a;
                    rhs[j * p + l] -= a;
                }
                k += 1;
            }
        }
        solver.solve(&rhs, n, p, theta, &mut state.beta);

        // δ-step and dual update.
        let mut max_residual: f64 = 0.0;
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let off = k * p;
                for l in 0..p {
                    z[l] = state.beta[i * p + l] - state.beta[j * p + l] + state.dual[off + l] / theta;
                }
                threshold_in_place(&mut z, lambda2, gamma, theta);
                let mut r2 = 0.0;
                for l in 0..p {
                    let diff = state.beta[i * p + l] - state.beta[j * p + l];
                    let r = diff - z[l];
                    state.delta[off + l] = z[l];
                    state.dual[off + l] += theta * r;
                    r2 += r * r;
                }
                max_residual = max_residual.max(r2.sqrt());
                k += 1;
            }
        }
        primal_residual_trace.push(max_residual);
        objective_trace.push(objective_rows(problem, &state.beta, lambda1, lambda2, gamma));
        if max_residual <= config.primal_tolerance {
            termination = Termination::Converged;
            break;
        }
    }

    let partition = extract_clusters(n, &state.delta_norms(p), config.fuse_tolerance);
    let raw = DMatrix::from_row_slice(n, p, &state.beta);
    let beta = average_within_clusters(&raw, &partition);
    Ok(FusionFit {
        k_hat: partition.num_clusters(),
        beta,
        partition,
        lambda1,
        lambda2,
        objective_trace,
        primal_residual_trace,
        iterations,
        termination,
        bic1: None,
        bic2: None,
        selection: None,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{SplineConfig, TimeGrid};
    use crate::fusion::{objective, Curve, CurveSet};
    use approx::assert_abs_diff_eq;

    fn cubic() -> SplineConfig {
        SplineConfig {
            degree: 3,
            interior_knots: 2,
            penalty_order: 2,
        }
    }

    fn two_group_curves(per_group: usize) -> CurveSet {
        let grid = TimeGrid::uniform(10).unwrap();
        let mut rows = Vec::new();
        for g in 0..2 {
            for _ in 0..per_group {
                rows.push(
                    grid.points()
                        .iter()
                        .map(|&t| if g == 0 { (1.5 * std::f64::consts::PI * t).cos() + 2.5 } else { t * t - 3.0 })
                        .collect(),
                );
            }
        }
        let ids: Vec<String> = (0..rows.len()).map(|i| format!("s{i}")).collect();
        CurveSet::on_grid(&grid, &ids, &rows).unwrap()
    }

    #[test]
    fn zero_fusion_weight_keeps_subjects_apart() {
        let mut set = two_group_curves(3);
        // Perturb so no two ridge fits coincide.
        let curves: Vec<Curve> = set
            .curves()
            .iter()
            .enumerate()
            .map(|(i, c)| Curve {
                values: c.values.iter().enumerate().map(|(m, v)| v + 0.01 * ((i * 7 + m * 3) % 5) as f64).collect(),
                ..c.clone()
            })
            .collect();
        set = CurveSet::new(curves).unwrap();
        let prob = FusionProblem::new(&set, &cubic()).unwrap();
        let fit = fit_fixed(&prob, 0.1, 0.0, &FusionConfig::default()).unwrap();
        assert_eq!(fit.k_hat, 6);
        assert_eq!(fit.termination, Termination::Converged);
        let ridge = prob.ridge_fits(0.1).unwrap();
        assert_abs_diff_eq!(fit.beta, ridge.beta, epsilon = 1e-9);
    }

    #[test]
    fn separated_identical_groups_fuse_exactly() {
        let set = two_group_curves(4);
        let prob = FusionProblem::new(&set, &cubic()).unwrap();
        let fit = fit_fixed(&prob, 0.01, 1.0, &FusionConfig::default()).unwrap();
        assert_eq!(fit.k_hat, 2);
        assert_eq!(fit.partition.labels(), &[0, 0, 0, 0, 1, 1, 1, 1]);
        // Oracle: each group's ridge fit on its own (identical) curves.
        let ridge = prob.ridge_fits(0.01).unwrap();
        for i in 0..8 {
            assert_abs_diff_eq!(fit.beta.row(i), ridge.beta.row(i), epsilon = 1e-3);
        }
        assert_eq!(fit.beta.row(0), fit.beta.row(3));
    }

    #[test]
    fn shared_and_coupled_solvers_agree() {
        let set = two_group_curves(3);
        let prob = FusionProblem::new(&set, &cubic()).unwrap();
        let solver_shared = CoefficientSolver::new(&prob, 0.2, 1.0).unwrap();
        // Force the coupled path by building it explicitly.
        let n = prob.n();
        let p = prob.dim();
        let mut big = DMatrix::zeros(n * p, n * p);
        for i in 0..n {
            let block = prob.gram(i) + prob.penalty() * 0.2;
            for a in 0..p {
                for b in 0..p {
                    big[(i * p + a, i * p + b)] = block[(a, b)];
                }
                big[(i * p + a, i * p + a)] += (n - 1) as f64;
                for j in 0..n {
                    if j != i {
                        big[(i * p + a, j * p + a)] = -1.0;
                    }
                }
            }
        }
        let coupled = CoefficientSolver::Coupled(Cholesky::new(big).unwrap());
        let rhs: Vec<f64> = (0..n * p).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
        let mut a = vec![0.0; n * p];
        let mut b = vec![0.0; n * p];
        solver_shared.solve(&rhs, n, p, 1.0, &mut a);
        coupled.solve(&rhs, n, p, 1.0, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn unbalanced_grids_use_coupled_solver() {
        let g1 = TimeGrid::uniform(8).unwrap();
        let g2 = TimeGrid::uniform(11).unwrap();
        let f = |t: f64| (3.0 * t).sin();
        let curves = vec![
            Curve { id: "a".into(), values: g1.points().iter().map(|&t| f(t)).collect(), grid: g1.clone() },
            Curve { id: "b".into(), values: g2.points().iter().map(|&t| f(t)).collect(), grid: g2.clone() },
            Curve { id: "c".into(), values: g2.points().iter().map(|&t| f(t) + 4.0).collect(), grid: g2 },
        ];
        let prob = FusionProblem::new(&CurveSet::new(curves).unwrap(), &cubic()).unwrap();
        assert!(!prob.shared_design());
        let fit = fit_fixed(&prob, 0.01, 1.0, &FusionConfig::default()).unwrap();
        assert_eq!(fit.partition.labels(), &[0, 0, 1]);
    }

    #[test]
    fn objective_trace_matches_objective() {
        let set = two_group_curves(3);
        let prob = FusionProblem::new(&set, &cubic()).unwrap();
        let fit = fit_fixed(&prob, 0.05, 0.5, &FusionConfig::default()).unwrap();
        let raw = DMatrix::from_row_slice(prob.n(), prob.dim(), &fit.state.beta);
        let direct = objective(&prob, &raw, 0.05, 0.5, 3.0).unwrap();
        assert_abs_diff_eq!(*fit.objective_trace.last().unwrap(), direct, epsilon = 1e-10);
        assert_eq!(fit.objective_trace.len(), fit.iterations);
        if fit.termination == Termination::Converged {
            assert!(fit.final_primal_residual() <= 1e-4);
        }
    }
}
