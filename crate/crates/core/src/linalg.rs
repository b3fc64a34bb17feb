//! Small dense symmetric-matrix helpers shared by the estimators.

use nalgebra::{DMatrix, SymmetricEigen};

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Result of projecting a symmetric matrix onto the PSD cone.
#[derive(Debug, Clone)]
pub struct PsdProjection {
    pub matrix: DMatrix<f64>,
    /// Number of eigenvalues that were negative and clipped to zero.
    pub clipped: usize,
    pub min_eigenvalue: f64,
}

/// Nearest PSD matrix in Frobenius norm: symmetrize, then clip negative
/// eigenvalues at zero.
pub fn project_psd(a: &DMatrix<f64>) -> PsdProjection {
    let sym = symmetrize(a);
    let eig = SymmetricEigen::new(sym.clone());
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let clipped = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    if clipped == 0 {
        return PsdProjection {
            matrix: sym,
            clipped,
            min_eigenvalue,
        };
    }
    let vals = eig.eigenvalues.map(|l| l.max(0.0));
    let q = &eig.eigenvectors;
    let matrix = symmetrize(&(q * DMatrix::from_diagonal(&vals) * q.transpose()));
    PsdProjection {
        matrix,
        clipped,
        min_eigenvalue,
    }
}

/// Symmetric square root `Q diag(sqrt(max(l, 0))) Qᵀ`.
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(a));
    let vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&vals) * q.transpose()
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(symmetrize(a)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn is_zero(a: &DMatrix<f64>) -> bool {
    a.iter().all(|&x| x == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn clipping_on_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        let p = project_psd(&a);
        assert_eq!(p.clipped, 1);
        assert_abs_diff_eq!(p.matrix, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0])), epsilon = 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let r = sym_sqrt(&a);
        assert_abs_diff_eq!(&r * &r, a, epsilon = 1e-10);
    }
}
