use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_len, Result, XcError};
use crate::exchange::NonlocalOperator;
use crate::hamiltonian::{RadialHamiltonian, GAP_WARNING};
use crate::orbitals::OrbitalSet;
use crate::potentials::{Gauge, LocalPotential};
use crate::tridiag::{dot, norm};

/// Grids with fewer interior points than this use a dense direct solve.
pub const DENSE_FALLBACK_BELOW: usize = 256;
pub const PROJECTED_TOL: f64 = 1e-10;
const MAX_PCG_ITER: usize = 2000;

#[derive(Debug, Clone, Serialize)]
pub struct OepResidual {
    /// ϱ^W(r_k) in u-representation.
    pub values: Vec<f64>,
    pub integral: f64,
    pub l2_norm: f64,
    pub solves: usize,
    /// ‖Q(K − v_x)φ_i‖ per orbital.
    pub rhs_norms: Vec<f64>,
    /// Iterations used per projected solve (0 for direct solves).
    pub iterations: Vec<usize>,
}

/// ϱ^W = 2 Σ_i φ_i · [Q (ε_i − Q H_W Q)^{-1} Q (K − v_x) φ_i].
///
/// `phi` must hold the lowest N eigenpairs of −½Δ + W, eigenvalues attached.
pub fn oep_residual(
    phi: &OrbitalSet,
    w: &LocalPotential,
    v_x: &LocalPotential,
    k: &dyn NonlocalOperator,
) -> Result<OepResidual> {
    let grid = phi.grid();
    check_len(grid.len(), w.values().len())?;
    check_len(grid.len(), v_x.values().len())?;
    let eps = phi
        .eigenvalues()
        .ok_or_else(|| XcError::Parameter("oep_residual needs orbitals with eigenvalues".into()))?
        .to_vec();
    let n = phi.len();
    let h = RadialHamiltonian::new(grid.clone(), w.values())?;
    let spectrum = h.eigenvalues(n + 1)?;
    let gap = spectrum[n] - eps[n - 1];
    if !(gap > GAP_WARNING) {
        return Err(XcError::GapAssumption(gap));
    }
    let m = grid.interior();
    let sw = h.sqrt_weights().to_vec();
    let occ: Vec<Vec<f64>> = phi.orbitals().iter().map(|u| (0..m).map(|q| u[q] * sw[q]).collect()).collect();
    let project = |x: &mut Vec<f64>| {
        for _ in 0..2 {
            for y in &occ {
                let c = dot(x, y);
                x.iter_mut().zip(y).for_each(|(a, b)| *a -= c * b);
            }
        }
    };
    let t = h.full();

    let mut values = vec![0.0; grid.len()];
    let mut rhs_norms = Vec::with_capacity(n);
    let mut iterations = Vec::with_capacity(n);
    for i in 0..n {
        let u = phi.orbital(i);
        let ku = k.apply(u);
        let mut b: Vec<f64> = (0..m).map(|q| -(ku[q] - v_x.values()[q] * u[q]) * sw[q]).collect();
        project(&mut b);
        let bn = norm(&b);
        rhs_norms.push(bn);
        if bn == 0.0 {
            iterations.push(0);
            continue;
        }
        let (x, its) = if m < DENSE_FALLBACK_BELOW {
            let mut a = DMatrix::zeros(m, m);
            for q in 0..m {
                let mut e = vec![0.0; m];
                e[q] = 1.0;
                project(&mut e);
                let mut col = t.matvec(&e);
                col.iter_mut().zip(&e).for_each(|(c, e)| *c -= eps[i] * e);
                project(&mut col);
                // identity on the occupied space keeps the matrix invertible
                for y in &occ {
                    col.iter_mut().zip(y).for_each(|(c, yv)| *c += yv * y[q]);
                }
                a.set_column(q, &DVector::from_vec(col));
            }
            let a = 0.5 * (&a + a.transpose());
            let x = a
                .lu()
                .solve(&DVector::from_vec(b.clone()))
                .ok_or_else(|| XcError::Numerical(format!("singular projected system for orbital {i}, distance to spectrum {gap:e}")))?;
            let mut x: Vec<f64> = x.iter().copied().collect();
            project(&mut x);
            (x, 0)
        } else {
            let sigma = eps[0] - 0.5 * (spectrum[n] - eps[0]).max(1e-3);
            pcg(&t, eps[i], sigma, &b, &project).ok_or_else(|| {
                XcError::Numerical(format!(
                    "projected solve for orbital {i} did not converge; eps_(N+1) - eps_i = {:e}",
                    spectrum[n] - eps[i]
                ))
            })?
        };
        iterations.push(its);
        for q in 0..m {
            values[q] += 2.0 * u[q] * x[q] / sw[q];
        }
    }
    let integral = grid.integrate(&values)?;
    let l2_norm = grid.inner(&values, &values).sqrt();
    Ok(OepResidual { values, integral, l2_norm, solves: n, rhs_norms, iterations })
}

/// Preconditioned CG for (T − ε) x = b on the range of Q, preconditioner Q (T − σ)^{-1} Q.
fn pcg(
    t: &crate::tridiag::SymTridiag,
    eps: f64,
    sigma: f64,
    b: &[f64],
    project: &dyn Fn(&mut Vec<f64>),
) -> Option<(Vec<f64>, usize)> {
    let bn = norm(b);
    let precond = |r: &[f64]| {
        let mut z = t.solve_shifted(None, sigma, r);
        project(&mut z);
        z
    };
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=MAX_PCG_ITER {
        let mut ap = t.matvec(&p);
        ap.iter_mut().zip(&p).for_each(|(a, p)| *a -= eps * p);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return None;
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        project(&mut r);
        if norm(&r) <= PROJECTED_TOL * bn {
            project(&mut x);
            return Some((x, it));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        project(&mut p);
    }
    None
}

/// c_i = 2(ε_i − ε_1) from the attached eigenvalues.
pub fn eigen_shifts(phi: &OrbitalSet) -> Result<Vec<f64>> {
    let e = phi.eigenvalues().ok_or_else(|| XcError::Parameter("orbitals carry no eigenvalues".into()))?;
    Ok(e.iter().map(|x| 2.0 * (x - e[0])).collect())
}

/// W = (Σ_i u_i u_i'' + Σ_i c_i u_i²) / (2ρ), with the ground-state level at zero.
pub fn reconstruct_potential(phi: &OrbitalSet, c: &[f64]) -> Result<LocalPotential> {
    check_len(phi.len(), c.len())?;
    if c[0] != 0.0 || c.iter().any(|x| !(*x >= 0.0)) {
        return Err(XcError::Parameter("shifts must be nonnegative with c_1 = 0".into()));
    }
    let grid = phi.grid();
    let rho = phi.density();
    let mask = phi.support_mask();
    let mut num = vec![0.0; grid.len()];
    for (u, ci) in phi.orbitals().iter().zip(c) {
        let d2 = grid.second_derivative(u);
        for q in 0..num.len() {
            num[q] += u[q] * d2[q] + ci * u[q] * u[q];
        }
    }
    let values = (0..num.len())
        .map(|q| if mask[q] && q < grid.interior() { num[q] / (2.0 * rho[q]) } else { 0.0 })
        .collect();
    LocalPotential::new(grid.clone(), values, Gauge::None)
}

/// L² norms of (u_i'u_1 − u_1'u_i)' + c_i u_1 u_i for i ≥ 2.
///
/// These vanish when all orbitals are eigenfunctions of one local operator with
/// eigenvalues ε_i and c_i = 2(ε_i − ε_1).
pub fn wronskian_residual(phi: &OrbitalSet, c: &[f64]) -> Result<Vec<f64>> {
    check_len(phi.len(), c.len())?;
    let grid = phi.grid();
    let u1 = phi.orbital(0);
    let d1 = grid.second_derivative(u1);
    let w = grid.weights();
    Ok((1..phi.len())
        .map(|i| {
            let ui = phi.orbital(i);
            let di = grid.second_derivative(ui);
            (0..grid.interior())
                .map(|q| {
                    let r = u1[q] * di[q] - ui[q] * d1[q] + c[i] * u1[q] * ui[q];
                    w[q] * r * r
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}
