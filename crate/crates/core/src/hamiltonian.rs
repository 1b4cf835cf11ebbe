use std::sync::Arc;

use crate::error::{check_len, Result, XcError};
use crate::grid::RadialGrid;
use crate::orbitals::OrbitalSet;
use crate::tridiag::{dot, norm, SymTridiag};

/// Below this spacing between ε_N and ε_{N+1} the aufbau occupation is ambiguous.
pub const GAP_WARNING: f64 = 1e-8;

/// −½ d²/dr² + W on the interior nodes, with u(0) = u(r_max) = 0.
///
/// Stored in the symmetrized form W^{-1/2} T W^{-1/2} + diag(W), where T is the
/// stiffness matrix of the stencil and W the quadrature weights, so that
/// eigenvectors come out orthonormal in the quadrature inner product.
#[derive(Debug, Clone)]
pub struct RadialHamiltonian {
    grid: Arc<RadialGrid>,
    potential: Vec<f64>,
    kinetic: SymTridiag,
    sqrt_w: Vec<f64>,
}

/// Lowest eigenpairs of a [`RadialHamiltonian`].
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub orbitals: OrbitalSet,
    /// ε_{N+1}, when the grid has room for it.
    pub next: Option<f64>,
    pub warning: Option<String>,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        self.orbitals.eigenvalues().expect("eigensolver attaches eigenvalues")
    }

    pub fn gap(&self) -> Option<f64> {
        self.next.map(|e| e - self.eigenvalues()[self.orbitals.len() - 1])
    }
}

impl RadialHamiltonian {
    pub fn new(grid: Arc<RadialGrid>, potential: &[f64]) -> Result<Self> {
        check_len(grid.len(), potential.len())?;
        if let Some(k) = potential[..grid.interior()].iter().position(|v| !v.is_finite()) {
            return Err(XcError::Parameter(format!("non-finite potential at grid index {k}")));
        }
        let m = grid.interior();
        let (w, e) = (grid.weights(), grid.edges());
        let sqrt_w: Vec<f64> = w[..m].iter().map(|x| x.sqrt()).collect();
        let d = (0..m).map(|k| 0.5 * (1.0 / e[k] + 1.0 / e[k + 1]) / w[k]).collect();
        let o = (0..m - 1).map(|k| -0.5 / e[k + 1] / (sqrt_w[k] * sqrt_w[k + 1])).collect();
        Ok(RadialHamiltonian { grid, potential: potential.to_vec(), kinetic: SymTridiag::new(d, o), sqrt_w })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Symmetric tridiagonal representation (diagonal, off-diagonal) acting on y = √w u.
    pub fn tridiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let t = self.full();
        (t.d, t.o)
    }

    pub(crate) fn full(&self) -> SymTridiag {
        let d = self.kinetic.d.iter().zip(&self.potential).map(|(t, v)| t + v).collect();
        SymTridiag::new(d, self.kinetic.o.clone())
    }

    pub(crate) fn kinetic_part(&self) -> &SymTridiag {
        &self.kinetic
    }

    pub(crate) fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_w
    }

    /// (H u)(r_k) on interior nodes; the pinned outer node gets 0.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.len(), u.len())?;
        let m = self.grid.interior();
        let y: Vec<f64> = (0..m).map(|k| u[k] * self.sqrt_w[k]).collect();
        let hy = self.full().matvec(&y);
        let mut out = vec![0.0; self.grid.len()];
        for k in 0..m {
            out[k] = hy[k] / self.sqrt_w[k];
        }
        Ok(out)
    }

    /// The lowest `count` eigenvalues, without eigenvectors.
    pub fn eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        let t = self.full();
        if count == 0 || count > t.len() {
            return Err(XcError::Parameter(format!("cannot take {count} eigenvalues of a {} point grid", t.len())));
        }
        Ok(bisect_lowest(&t, count))
    }

    /// Lowest N eigenpairs by bisection and inverse iteration.
    pub fn lowest_eigenpairs(&self, n: usize) -> Result<Spectrum> {
        let t = self.full();
        let m = t.len();
        if n == 0 || n >= m {
            return Err(XcError::Parameter(format!("need 0 < N < {m}, got {n}")));
        }
        let values = bisect_lowest(&t, n + 1);
        let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (i, &lam) in values[..n].iter().enumerate() {
            let y = inverse_iteration(&t, lam, &vecs, i).ok_or_else(|| {
                XcError::Numerical(format!("inverse iteration failed for eigenvalue {i} ({lam:e}), grid size {m}"))
            })?;
            vecs.push(y);
        }
        let us = vecs.iter().map(|y| self.to_u(y)).collect();
        let orbitals = OrbitalSet::new(self.grid.clone(), us, Some(values[..n].to_vec()))
            .map_err(|e| XcError::Numerical(format!("eigenvectors failed validation: {e}")))?;
        let next = Some(values[n]);
        let gap = values[n] - values[n - 1];
        let warning = (gap < GAP_WARNING).then(|| format!("aufbau gap eps_(N+1) - eps_N = {gap:e} is below {GAP_WARNING:e}"));
        if let Some(w) = &warning {
            log::warn!("{w}");
        }
        Ok(Spectrum { orbitals, next, warning })
    }

    pub(crate) fn to_u(&self, y: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.grid.len()];
        for (k, (yk, s)) in y.iter().zip(&self.sqrt_w).enumerate() {
            u[k] = yk / s;
        }
        fix_sign(&mut u);
        u
    }
}

pub(crate) fn bisect_lowest(t: &SymTridiag, count: usize) -> Vec<f64> {
    let (lo, hi) = t.gershgorin();
    let pad = 1e-12 * (lo.abs() + hi.abs()) + f64::MIN_POSITIVE;
    let (lo, hi) = (lo - pad, hi + pad);
    (0..count).map(|k| t.eigenvalue(k, (lo, hi))).collect()
}

/// Sign convention: the first sample that is significant on the scale of the vector is positive.
pub(crate) fn fix_sign(u: &mut [f64]) {
    let big = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = u.iter().find(|x| x.abs() > 1e-8 * big) {
        if *first < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn inverse_iteration(t: &SymTridiag, lam: f64, prev: &[Vec<f64>], salt: usize) -> Option<Vec<f64>> {
    let m = t.len();
    let mut x: Vec<f64> = (0..m).map(|k| 1.0 + 0.5 * ((k * 7 + salt * 13) as f64 * 0.618).sin()).collect();
    let scale = lam.abs().max(1.0);
    // nudge off the exact eigenvalue so the factorization stays finite
    let shift = lam + f64::EPSILON * scale;
    for _ in 0..4 {
        let mut y = t.solve_shifted(None, shift, &x);
        for p in prev {
            let c = dot(&y, p);
            y.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
        }
        let nrm = norm(&y);
        if !nrm.is_finite() || nrm == 0.0 {
            return None;
        }
        y.iter_mut().for_each(|v| *v /= nrm);
        x = y;
    }
    for p in prev {
        let c = dot(&x, p);
        x.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
    }
    let nrm = norm(&x);
    x.iter_mut().for_each(|v| *v /= nrm);
    Some(x)
}
