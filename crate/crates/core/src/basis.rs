//! B-spline design matrices and difference penalties.
//!
//! Bases use a clamped knot vector on `[0, 1]` with equally spaced interior
//! knots, so the basis spans constants, interpolates the endpoints, and its
//! dimension is `degree + 1 + interior_knots`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing evaluation points in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidGrid(format!("point {p} outside [0, 1]")));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "points not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(TimeGrid(points))
    }

    /// `m` equally spaced points with both endpoints included.
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {m}")));
        }
        let step = 1.0 / (m - 1) as f64;
        Self::new((0..m).map(|i| if i + 1 == m { 1.0 } else { i as f64 * step }).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplineConfig {
    /// 0 = step, 1 = linear, 3 = cubic.
    pub degree: usize,
    pub interior_knots: usize,
    pub penalty_order: usize,
}

impl Default for SplineConfig {
    fn default() -> Self {
        SplineConfig {
            degree: 1,
            interior_knots: 4,
            penalty_order: 2,
        }
    }
}

impl SplineConfig {
    pub fn dimension(&self) -> usize {
        self.degree + 1 + self.interior_knots
    }

    pub fn validate(&self) -> Result<()> {
        if self.penalty_order == 0 {
            return Err(Error::InvalidSpline("penalty order must be >= 1".into()));
        }
        if self.penalty_order >= self.dimension() {
            return Err(Error::PenaltyOrder {
                order: self.penalty_order,
                dim: self.dimension(),
            });
        }
        Ok(())
    }

    /// Clamped knot vector: `degree + 1` copies of each endpoint around the
    /// equally spaced interior knots.
    pub fn knots(&self) -> Vec<f64> {
        let inner = self.interior_knots;
        let mut knots = Vec::with_capacity(2 * (self.degree + 1) + inner);
        knots.extend(std::iter::repeat_n(0.0, self.degree + 1));
        knots.extend((1..=inner).map(|k| k as f64 / (inner + 1) as f64));
        knots.extend(std::iter::repeat_n(1.0, self.degree + 1));
        knots
    }
}

#[derive(Debug, Clone)]
pub struct SplineDesign {
    /// `m × J_n` basis values at the grid points.
    pub basis: DMatrix<f64>,
    /// `(J_n − d) × J_n` difference operator.
    pub delta: DMatrix<f64>,
    /// `Δᵀ Δ`.
    pub penalty: DMatrix<f64>,
    pub config: SplineConfig,
    pub warnings: Vec<String>,
}

impl SplineDesign {
    pub fn dimension(&self) -> usize {
        self.basis.ncols()
    }
}

/// Values of all `J_n` basis functions at `t`.
pub fn basis_values(config: &SplineConfig, knots: &[f64], t: f64) -> Vec<f64> {
    let p = config.degree;
    let dim = config.dimension();
    let mut out = vec![0.0; dim];
    // Knot span [knots[span], knots[span + 1]) containing t; the right
    // endpoint belongs to the last non-degenerate span.
    let span = if t >= 1.0 {
        dim - 1
    } else {
        let mut s = p;
        while s < dim - 1 && knots[s + 1] <= t {
            s += 1;
        }
        s
    };

    // Cox-de Boor triangle for the p + 1 nonzero functions on the span.
    let mut n = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    for (r, v) in n.into_iter().enumerate() {
        out[span - p + r] = v;
    }
    out
}

pub fn build_design(grid: &TimeGrid, config: &SplineConfig) -> Result<SplineDesign> {
    config.validate()?;
    let dim = config.dimension();
    let knots = config.knots();
    let m = grid.len();
    let mut basis = DMatrix::zeros(m, dim);
    for (row, &t) in grid.points().iter().enumerate() {
        for (col, v) in basis_values(config, &knots, t).into_iter().enumerate() {
            basis[(row, col)] = v;
        }
    }
    let (delta, penalty) = difference_penalty(dim, config.penalty_order)?;
    let mut warnings = Vec::new();
    if m < dim {
        warnings.push(format!(
            "grid has {m} points but the basis has {dim} functions; unpenalized fits are rank-deficient"
        ));
    }
    Ok(SplineDesign {
        basis,
        delta,
        penalty,
        config: *config,
        warnings,
    })
}

/// `d`-th order difference operator on `dim` coefficients and its Gram
/// matrix `ΔᵀΔ`.
pub fn difference_penalty(dim: usize, order: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if order == 0 {
        return Err(Error::InvalidSpline("penalty order must be >= 1".into()));
    }
    if order >= dim {
        return Err(Error::PenaltyOrder { order, dim });
    }
    let mut delta = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..order {
        let rows = delta.nrows() - 1;
        delta = DMatrix::from_fn(rows, dim, |i, j| delta[(i + 1, j)] - delta[(i, j)]);
    }
    let penalty = delta.transpose() * &delta;
    Ok((delta, penalty))
}
