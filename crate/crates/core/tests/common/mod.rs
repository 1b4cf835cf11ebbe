//! Dense reference computations shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use xcpot_core::{ExchangeBlock, GridKind, NonlocalOperator, OrbitalSet, RadialGrid, RadialHamiltonian};

pub fn small_grid(n: usize) -> Arc<RadialGrid> {
    RadialGrid::build(n, 20.0, GridKind::Log).unwrap().shared()
}

/// 1/max(r, r') with the diagonal kink correction, assembled entry by entry.
pub fn kernel(g: &RadialGrid) -> DMatrix<f64> {
    let (r, w, s) = (g.points(), g.weights(), g.steps());
    DMatrix::from_fn(g.len(), g.len(), |k, l| {
        if k == l {
            1.0 / r[k] - s[k] * s[k] / (12.0 * r[k] * r[k] * w[k])
        } else {
            1.0 / r[k].max(r[l])
        }
    })
}

pub fn gamma(phi: &OrbitalSet) -> DMatrix<f64> {
    let n = phi.grid().len();
    DMatrix::from_fn(n, n, |k, l| phi.orbitals().iter().map(|u| u[k] * u[l]).sum())
}

pub fn weights(phi: &OrbitalSet) -> DVector<f64> {
    DVector::from_column_slice(phi.grid().weights())
}

/// Kernel of the exchange operator, K(r, r') = −γ(r, r')/max(r, r').
pub fn exchange_kernel(phi: &OrbitalSet) -> DMatrix<f64> {
    -gamma(phi).component_mul(&kernel(phi.grid()))
}

/// (A ∘ B)(k, l) = Σ_s A(k, s) w_s B(s, l).
pub fn compose(a: &DMatrix<f64>, w: &DVector<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * DMatrix::from_diagonal(w) * b
}

/// ∫∫ x(r, r')² dr dr'.
pub fn hs2(x: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let mut s = 0.0;
    for k in 0..x.nrows() {
        for l in 0..x.ncols() {
            s += w[k] * w[l] * x[(k, l)] * x[(k, l)];
        }
    }
    s
}

/// Kernel of (v − K)Υ.
pub fn xg(phi: &OrbitalSet, v: &[f64]) -> DMatrix<f64> {
    let w = weights(phi);
    let g = gamma(phi);
    let kg = compose(&exchange_kernel(phi), &w, &g);
    DMatrix::from_fn(g.nrows(), g.ncols(), |k, l| v[k] * g[(k, l)] - kg[(k, l)])
}

pub fn dense_j_s(phi: &OrbitalSet, v: &[f64]) -> f64 {
    let g = gamma(phi);
    let c = kernel(phi.grid());
    let x = DMatrix::from_fn(g.nrows(), g.ncols(), |k, l| v[k] * g[(k, l)] + g[(k, l)] * c[(k, l)]);
    0.5 * hs2(&x, &weights(phi))
}

pub fn dense_i_s(phi: &OrbitalSet, v: &[f64]) -> f64 {
    0.5 * hs2(&xg(phi, v), &weights(phi))
}

fn diag_elements(phi: &OrbitalSet, v: &[f64]) -> DMatrix<f64> {
    let w = weights(phi);
    let kk = exchange_kernel(phi);
    let n = phi.len();
    DMatrix::from_fn(n, n, |i, j| {
        let ui = DVector::from_column_slice(phi.orbital(i));
        let uj = DVector::from_column_slice(phi.orbital(j));
        let kuj = &kk * uj.component_mul(&w);
        (0..w.len()).map(|k| w[k] * ui[k] * (v[k] * uj[k] - kuj[k])).sum()
    })
}

pub fn dense_j_kli(phi: &OrbitalSet, v: &[f64]) -> f64 {
    let m = diag_elements(phi, v);
    dense_i_s(phi, v) - 0.5 * (0..phi.len()).map(|i| m[(i, i)].powi(2)).sum::<f64>()
}

/// ½‖[v − K, Υ]‖² from the commutator kernel.
pub fn dense_j_elp(phi: &OrbitalSet, v: &[f64]) -> f64 {
    let a = xg(phi, v);
    let c = &a - a.transpose();
    0.5 * hs2(&c, &weights(phi))
}

/// Pointwise minimizer of the dense J_S.
pub fn dense_slater_minimizer(phi: &OrbitalSet) -> Vec<f64> {
    let g = gamma(phi);
    let c = kernel(phi.grid());
    let w = phi.grid().weights();
    let mask = phi.support_mask();
    (0..w.len())
        .map(|k| {
            if !mask[k] {
                return 0.0;
            }
            let num: f64 = (0..w.len()).map(|l| w[l] * g[(k, l)].powi(2) * c[(k, l)]).sum();
            let den: f64 = (0..w.len()).map(|l| w[l] * g[(k, l)].powi(2)).sum();
            -num / den
        })
        .collect()
}

/// Minimizer of a quadratic ½vᵀHv − bᵀv over the support, up to the constant null direction.
/// H is Jacobi-scaled and pseudo-inverted through its eigendecomposition.
fn quadratic_minimizer(phi: &OrbitalSet, h: DMatrix<f64>, b: DVector<f64>) -> Vec<f64> {
    let mask = phi.support_mask();
    let idx: Vec<usize> = (0..mask.len()).filter(|&k| mask[k]).collect();
    let m = idx.len();
    let d: Vec<f64> = idx.iter().map(|&k| h[(k, k)].sqrt()).collect();
    let hs = DMatrix::from_fn(m, m, |a, c| h[(idx[a], idx[c])] / (d[a] * d[c]));
    let bs = DVector::from_fn(m, |a, _| b[idx[a]] / d[a]);
    let eig = hs.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let mut x = DVector::zeros(m);
    for (c, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() > 1e-10 * top {
            let e = eig.eigenvectors.column(c);
            x += e * (e.dot(&bs) / lam);
        }
    }
    let mut v = vec![0.0; mask.len()];
    for (a, &k) in idx.iter().enumerate() {
        v[k] = x[a] / d[a];
    }
    v
}

fn pair_vectors(phi: &OrbitalSet) -> (DVector<f64>, Vec<DVector<f64>>, DMatrix<f64>) {
    let w = weights(phi);
    let kk = exchange_kernel(phi);
    let us: Vec<DVector<f64>> = phi.orbitals().iter().map(|u| DVector::from_column_slice(u)).collect();
    let kus: Vec<DVector<f64>> = us.iter().map(|u| &kk * u.component_mul(&w)).collect();
    let n = us.len();
    let kmat = DMatrix::from_fn(n, n, |i, j| (0..w.len()).map(|k| w[k] * us[i][k] * kus[j][k]).sum());
    (w, us, kmat)
}

/// Normal equations of J_KLI: [Σ_j diag(w u_j²) − Σ_i (w u_i²)(w u_i²)ᵀ] v = Σ_j w u_j Ku_j − Σ_i w u_i² K_ii.
pub fn dense_kli_minimizer(phi: &OrbitalSet) -> Vec<f64> {
    let (w, us, kmat) = pair_vectors(phi);
    let kk = exchange_kernel(phi);
    let npts = w.len();
    let mut h = DMatrix::zeros(npts, npts);
    let mut b = DVector::zeros(npts);
    for (i, u) in us.iter().enumerate() {
        let a = DVector::from_fn(npts, |k, _| w[k] * u[k] * u[k]);
        let ku = &kk * u.component_mul(&w);
        for k in 0..npts {
            h[(k, k)] += a[k];
            b[k] += w[k] * u[k] * ku[k];
        }
        h -= &a * a.transpose();
        b -= &a * kmat[(i, i)];
    }
    quadratic_minimizer(phi, h, b)
}

/// Normal equations of J_ELP: [Σ_j diag(w u_j²) − Σ_ij (w u_i u_j)(w u_i u_j)ᵀ] v = Σ_j w u_j Ku_j − Σ_ij w u_i u_j K_ij.
pub fn dense_elp_minimizer(phi: &OrbitalSet) -> Vec<f64> {
    let (w, us, kmat) = pair_vectors(phi);
    let kk = exchange_kernel(phi);
    let npts = w.len();
    let mut h = DMatrix::zeros(npts, npts);
    let mut b = DVector::zeros(npts);
    for u in &us {
        let ku = &kk * u.component_mul(&w);
        for k in 0..npts {
            h[(k, k)] += w[k] * u[k] * u[k];
            b[k] += w[k] * u[k] * ku[k];
        }
    }
    for i in 0..us.len() {
        for j in 0..us.len() {
            let a = DVector::from_fn(npts, |k, _| w[k] * us[i][k] * us[j][k]);
            h -= &a * a.transpose();
            b -= &a * kmat[(i, j)];
        }
    }
    quadratic_minimizer(phi, h, b)
}

/// max |(a − b) − mean(a − b)| over the support: zero iff a and b differ by a constant there.
pub fn spread_of_difference(phi: &OrbitalSet, a: &[f64], b: &[f64]) -> f64 {
    let mask = phi.support_mask();
    let d: Vec<f64> = (0..a.len()).filter(|&k| mask[k]).map(|k| a[k] - b[k]).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max)
}

/// Smooth bounded perturbation, deterministic in `seed`.
pub fn perturbation(g: &RadialGrid, seed: u64, amplitude: f64) -> Vec<f64> {
    let a = [0.3, 0.7, 1.1, 1.9, 2.3];
    let s = seed as f64;
    g.sample(|r| {
        let mut v = 0.0;
        for (i, f) in a.iter().enumerate() {
            v += ((s + 1.0) * (i as f64 + 0.5) * 1.618).sin() * (f * r / (1.0 + 0.1 * r) + s).cos();
        }
        amplitude * v / a.len() as f64
    })
}

/// 2 Σ_i Σ_{a>N} u_i ψ_a ⟨ψ_a|K − v_x|u_i⟩ / (ε_i − ε_a) over all discrete virtual states.
pub fn sum_over_states(phi: &OrbitalSet, w: &[f64], v_x: &[f64], k: &ExchangeBlock) -> Vec<f64> {
    let grid = phi.grid();
    let m = grid.interior();
    let (d, o) = RadialHamiltonian::new(grid.clone(), w).unwrap().tridiagonal();
    let h = DMatrix::from_fn(m, m, |i, j| if i == j { d[i] } else if j == i + 1 { o[i] } else if i == j + 1 { o[j] } else { 0.0 });
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let sw: Vec<f64> = grid.weights().iter().map(|x| x.sqrt()).collect();
    let n = phi.len();
    let eps = phi.eigenvalues().unwrap();
    let mut rho = vec![0.0; grid.len()];
    for i in 0..n {
        let u = phi.orbital(i);
        let ku = k.apply(u);
        let f: Vec<f64> = (0..grid.len()).map(|q| ku[q] - v_x[q] * u[q]).collect();
        for &a in &order[n..] {
            let psi: Vec<f64> = (0..m).map(|q| eig.eigenvectors[(q, a)] / sw[q]).collect();
            let c: f64 = (0..m).map(|q| grid.weights()[q] * psi[q] * f[q]).sum::<f64>() / (eps[i] - eig.eigenvalues[a]);
            for q in 0..m {
                rho[q] += 2.0 * u[q] * psi[q] * c;
            }
        }
    }
    rho
}
