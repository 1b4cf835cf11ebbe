//! Block Davidson for the lowest eigenpairs of a symmetric operator, with a
//! tridiagonal preconditioner and Olsen's correction.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::tridiag::{dot, norm, SymTridiag};

pub(crate) struct DavidsonResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest residual norm relative to its tolerance.
    pub residual: f64,
}

pub(crate) fn davidson(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &SymTridiag,
    start: Vec<Vec<f64>>,
    tols: &[f64],
    max_iter: usize,
) -> DavidsonResult {
    let k = start.len();
    debug_assert_eq!(tols.len(), k);
    let max_sub = 6 * k;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    extend(&mut basis, &mut images, start, apply);

    let mut values = vec![0.0; k];
    let mut vectors = Vec::new();
    let mut last = f64::INFINITY;
    for it in 0..max_iter {
        let dim = basis.len();
        let h = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i])));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let take = k.min(dim);
        let m = basis[0].len();
        let mut ritz = Vec::with_capacity(take);
        let mut ritz_img = Vec::with_capacity(take);
        values.clear();
        for &c in &order[..take] {
            let mut x = vec![0.0; m];
            let mut ax = vec![0.0; m];
            for j in 0..dim {
                let s = eig.eigenvectors[(j, c)];
                for q in 0..m {
                    x[q] += s * basis[j][q];
                    ax[q] += s * images[j][q];
                }
            }
            values.push(eig.eigenvalues[c]);
            ritz.push(x);
            ritz_img.push(ax);
        }
        let mut corrections = Vec::new();
        let mut worst = 0.0f64;
        let mut done = true;
        for c in 0..take {
            let r: Vec<f64> = ritz_img[c].iter().zip(&ritz[c]).map(|(a, x)| a - values[c] * x).collect();
            let rn = norm(&r);
            worst = worst.max(rn / tols[c]);
            if rn < tols[c] {
                continue;
            }
            done = false;
            let mr = precond.solve_shifted(None, values[c], &r);
            let mx = precond.solve_shifted(None, values[c], &ritz[c]);
            let e = dot(&ritz[c], &mr) / dot(&ritz[c], &mx);
            let t: Vec<f64> = mr.iter().zip(&mx).map(|(a, b)| a - e * b).collect();
            if t.iter().all(|v| v.is_finite()) {
                corrections.push(t);
            }
        }
        if done || corrections.is_empty() {
            return DavidsonResult { values, vectors: ritz, iterations: it, converged: done, residual: worst };
        }
        if basis.len() + corrections.len() > max_sub {
            basis = ritz.clone();
            images = ritz_img;
        }
        vectors = ritz;
        last = worst;
        extend(&mut basis, &mut images, corrections, apply);
    }
    DavidsonResult { values, vectors, iterations: max_iter, converged: false, residual: last }
}

/// Orthonormalize new directions against the basis and append them with their images.
fn extend(basis: &mut Vec<Vec<f64>>, images: &mut Vec<Vec<f64>>, new: Vec<Vec<f64>>, apply: &dyn Fn(&[f64]) -> Vec<f64>) {
    for mut t in new {
        let start = norm(&t);
        if !(start > 0.0) {
            continue;
        }
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(&t, b);
                t.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nrm = norm(&t);
        if nrm < 1e-10 * start {
            continue;
        }
        t.iter_mut().for_each(|x| *x /= nrm);
        images.push(apply(&t));
        basis.push(t);
    }
}
