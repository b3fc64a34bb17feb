use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::clusters::pair_count;
use super::mcp::penalty;
use crate::basis::{build_design, SplineConfig, SplineDesign, TimeGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub id: String,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

/// Subject curves, possibly on different grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    curves: Vec<Curve>,
}

impl CurveSet {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::Dimension("curve set is empty".into()));
        }
        for c in &curves {
            if c.values.len() != c.grid.len() {
                return Err(Error::Dimension(format!(
                    "subject {} has {} values on a grid of {} points",
                    c.id,
                    c.values.len(),
                    c.grid.len()
                )));
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dimension(format!("subject {} has non-finite values", c.id)));
            }
        }
        Ok(CurveSet { curves })
    }

    /// Curves sharing one grid, one row per subject.
    pub fn on_grid(grid: &TimeGrid, ids: &[String], rows: &[Vec<f64>]) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Dimension(format!("{} ids for {} curves", ids.len(), rows.len())));
        }
        Self::new(
            ids.iter()
                .zip(rows)
                .map(|(id, v)| Curve {
                    id: id.clone(),
                    grid: grid.clone(),
                    values: v.clone(),
                })
                .collect(),
        )
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }
}

/// Per-subject designs and sufficient statistics for the fusion fit.
///
/// Subjects on identical grids share one design; when every subject does,
/// the coefficient update of the solver decouples and costs two small
/// factorizations instead of one of size `n·J_n`.
#[derive(Debug, Clone)]
pub struct FusionProblem {
    ids: Vec<String>,
    responses: Vec<DVector<f64>>,
    designs: Vec<SplineDesign>,
    design_of: Vec<usize>,
    grams: Vec<DMatrix<f64>>,
    cross: Vec<DVector<f64>>,
    penalty: DMatrix<f64>,
    dim: usize,
}

impl FusionProblem {
    pub fn new(curves: &CurveSet, spline: &SplineConfig) -> Result<Self> {
        spline.validate()?;
        let mut grids: Vec<&TimeGrid> = Vec::new();
        let mut designs = Vec::new();
        let mut design_of = Vec::with_capacity(curves.len());
        for c in curves.curves() {
            let idx = match grids.iter().position(|g| *g == &c.grid) {
                Some(idx) => idx,
                None => {
                    grids.push(&c.grid);
                    designs.push(build_design(&c.grid, spline)?);
                    designs.len() - 1
                }
            };
            design_of.push(idx);
        }
        let grams: Vec<DMatrix<f64>> = designs.iter().map(|d| d.basis.tr_mul(&d.basis)).collect();
        let responses: Vec<DVector<f64>> = curves
            .curves()
            .iter()
            .map(|c| DVector::from_column_slice(&c.values))
            .collect();
        let cross = responses
            .iter()
            .zip(&design_of)
            .map(|(y, &d)| designs[d].basis.tr_mul(y))
            .collect();
        let penalty = designs[0].penalty.clone();
        Ok(FusionProblem {
            ids: curves.curves().iter().map(|c| c.id.clone()).collect(),
            responses,
            dim: spline.dimension(),
            designs,
            design_of,
            grams,
            cross,
            penalty,
        })
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn response(&self, i: usize) -> &DVector<f64> {
        &self.responses[i]
    }

    pub fn design(&self, i: usize) -> &SplineDesign {
        &self.designs[self.design_of[i]]
    }

    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.penalty
    }

    pub fn total_observations(&self) -> usize {
        self.responses.iter().map(|y| y.len()).sum()
    }

    pub fn shared_design(&self) -> bool {
        self.designs.len() == 1
    }

    pub(crate) fn gram(&self, i: usize) -> &DMatrix<f64> {
        &self.grams[self.design_of[i]]
    }

    pub(crate) fn cross(&self, i: usize) -> &DVector<f64> {
        &self.cross[i]
    }

    pub(crate) fn num_designs(&self) -> usize {
        self.designs.len()
    }

    pub(crate) fn design_gram(&self, d: usize) -> &DMatrix<f64> {
        &self.grams[d]
    }

    /// `B_i β` for one coefficient row.
    pub fn fitted(&self, i: usize, beta: &[f64]) -> DVector<f64> {
        &self.design(i).basis * DVector::from_column_slice(beta)
    }

    pub fn residual_ss(&self, i: usize, beta: &[f64]) -> f64 {
        (self.response(i) - self.fitted(i, beta)).norm_squared()
    }

    pub(crate) fn regularized_factor(&self, d: usize, lambda1: f64) -> Result<Cholesky<f64, Dyn>> {
        let a = &self.grams[d] + &self.penalty * lambda1;
        Cholesky::new(a).ok_or_else(|| {
            Error::Singular(format!(
                "BᵀB + λ₁D is not positive definite (λ₁ = {lambda1}, {} grid points, {} basis functions)",
                self.designs[d].basis.nrows(),
                self.dim
            ))
        })
    }

    /// Independent penalized fits with no fusion.
    pub fn ridge_fits(&self, lambda1: f64) -> Result<RidgeFits> {
        let n = self.n();
        let factors = (0..self.num_designs())
            .map(|d| self.regularized_factor(d, lambda1))
            .collect::<Result<Vec<_>>>()?;
        let df_by_design: Vec<f64> = factors
            .iter()
            .zip(&self.grams)
            .map(|(f, g)| f.solve(g).trace())
            .collect();
        let mut beta = DMatrix::zeros(n, self.dim);
        let mut df = Vec::with_capacity(n);
        let mut rss = Vec::with_capacity(n);
        for i in 0..n {
            let d = self.design_of[i];
            let b = factors[d].solve(&self.cross[i]);
            rss.push(self.residual_ss(i, b.as_slice()));
            beta.set_row(i, &b.transpose());
            df.push(df_by_design[d]);
        }
        Ok(RidgeFits { lambda1, beta, df, rss })
    }
}

#[derive(Debug, Clone)]
pub struct RidgeFits {
    pub lambda1: f64,
    /// `n × J_n`, one row per subject.
    pub beta: DMatrix<f64>,
    /// `tr{B_i (B_iᵀB_i + λ₁D)⁻¹ B_iᵀ}`.
    pub df: Vec<f64>,
    pub rss: Vec<f64>,
}

/// Fusion objective at coefficients `beta` (`n × J_n`).
pub fn objective(
    problem: &FusionProblem,
    beta: &DMatrix<f64>,
    lambda1: f64,
    lambda2: f64,
    gamma: f64,
) -> Result<f64> {
    let n = problem.n();
    if beta.nrows() != n || beta.ncols() != problem.dim() {
        return Err(Error::Dimension(format!(
            "coefficients are {}×{}, expected {}×{}",
            beta.nrows(),
            beta.ncols(),
            n,
            problem.dim()
        )));
    }
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("MCP gamma must exceed 1, got {gamma}")));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| beta.row(i).iter().copied().collect()).collect();
    Ok(objective_rows(problem, &rows.concat(), lambda1, lambda2, gamma))
}

/// Objective on a flat row-major coefficient buffer.
pub(crate) fn objective_rows(
    problem: &FusionProblem,
    beta: &[f64],
    lambda1: f64,
    lambda2: f64,
    gamma: f64,
) -> f64 {
    let p = problem.dim();
    let n = problem.n();
    let mut value = 0.0;
    for i in 0..n {
        let b = &beta[i * p..(i + 1) * p];
        let bv = DVector::from_column_slice(b);
        let rough = bv.dot(&(problem.penalty() * &bv));
        value += 0.5 * (problem.residual_ss(i, b) + lambda1 * rough);
    }
    if lambda2 > 0.0 && pair_count(n) > 0 {
        for i in 0..n {
            let bi = &beta[i * p..(i + 1) * p];
            for j in (i + 1)..n {
                let bj = &beta[j * p..(j + 1) * p];
                let norm = bi.iter().zip(bj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                value += penalty(norm, lambda2, gamma);
            }
        }
    }
    value
}
