use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues below this fraction of the largest magnitude (or of the caller's
/// scale, whichever is larger) count as kernel.
pub const PSEUDO_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct PseudoSolution {
    pub x: DVector<f64>,
    pub kernel: Vec<DVector<f64>>,
}

/// Minimum-norm least-squares solution of a symmetric system via eigendecomposition.
pub(crate) fn sym_pseudo_solve(a: &DMatrix<f64>, b: &DVector<f64>, scale: f64) -> PseudoSolution {
    let eig = SymmetricEigen::new(a.clone());
    let top = eig.eigenvalues.iter().fold(scale, |m, v| m.max(v.abs()));
    let thr = PSEUDO_REL_TOL * top;
    let mut x = DVector::zeros(b.len());
    let mut kernel = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if lam.abs() <= thr {
            kernel.push(v.into_owned());
        } else {
            x += v * (v.dot(b) / lam);
        }
    }
    PseudoSolution { x, kernel }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_system_min_norm() {
        // I - S with S having constant rows summing to one
        let a = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        let b = DVector::from_row_slice(&[1.0, -1.0]);
        let s = sym_pseudo_solve(&a, &b, 0.0);
        assert_eq!(s.kernel.len(), 1);
        assert!((&a * &s.x - &b).norm() < 1e-14);
        assert!((s.x[0] + s.x[1]).abs() < 1e-14);
    }
}
