use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Result, XcError};
use crate::grid::RadialGrid;

/// Points with ρ below this fraction of max ρ are treated as outside the support.
pub const RHO_FLOOR_REL: f64 = 1e-14;

const ORTHO_TOL: f64 = 1e-8;

/// N quadrature-orthonormal radial orbitals u_i = r φ_i.
#[derive(Debug, Clone)]
pub struct OrbitalSet {
    grid: Arc<RadialGrid>,
    u: Vec<Vec<f64>>,
    eigenvalues: Option<Vec<f64>>,
    rho: Vec<f64>,
}

impl OrbitalSet {
    pub fn new(grid: Arc<RadialGrid>, u: Vec<Vec<f64>>, eigenvalues: Option<Vec<f64>>) -> Result<Self> {
        if u.is_empty() {
            return Err(XcError::InvalidOrbitals("at least one orbital is required".into()));
        }
        for ui in &u {
            check_len(grid.len(), ui.len())?;
            if ui.iter().any(|x| !x.is_finite()) {
                return Err(XcError::InvalidOrbitals("non-finite orbital value".into()));
            }
        }
        if let Some(e) = &eigenvalues {
            check_len(u.len(), e.len())?;
        }
        let set = Self::assemble(grid, u, eigenvalues);
        let dev = set.orthonormality_error();
        if dev > ORTHO_TOL {
            return Err(XcError::InvalidOrbitals(format!("overlap deviates from identity by {dev:e}")));
        }
        Ok(set)
    }

    pub(crate) fn assemble(grid: Arc<RadialGrid>, u: Vec<Vec<f64>>, eigenvalues: Option<Vec<f64>>) -> Self {
        let mut rho = vec![0.0; grid.len()];
        for ui in &u {
            for (r, x) in rho.iter_mut().zip(ui) {
                *r += x * x;
            }
        }
        OrbitalSet { grid, u, eigenvalues, rho }
    }

    /// Modified Gram-Schmidt (two passes) in the quadrature inner product.
    pub fn orthonormalize(grid: Arc<RadialGrid>, mut raw: Vec<Vec<f64>>) -> Result<Self> {
        for i in 0..raw.len() {
            for _ in 0..2 {
                for j in 0..i {
                    let p = grid.inner(&raw[i], &raw[j]);
                    let (head, tail) = raw.split_at_mut(i);
                    for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                        *a -= p * b;
                    }
                }
                let nrm = grid.inner(&raw[i], &raw[i]).sqrt();
                if !(nrm > 1e-12) {
                    return Err(XcError::InvalidOrbitals(format!("orbital {i} is linearly dependent")));
                }
                raw[i].iter_mut().for_each(|x| *x /= nrm);
            }
        }
        Self::new(grid, raw, None)
    }

    /// Random smooth orthonormal orbitals vanishing at r_max, reproducible from `seed`.
    pub fn random(grid: Arc<RadialGrid>, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r_max = grid.r_max();
        let raw = (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(0.6..2.0);
                let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                grid.sample(|r| {
                    let x = r / r_max;
                    let poly = c[0] + c[1] * r + c[2] * r * r + 0.1 * c[3] * r * r * r;
                    r * (-a * r).exp() * poly * (1.0 - x)
                })
            })
            .collect();
        Self::orthonormalize(grid, raw)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn orbital(&self, i: usize) -> &[f64] {
        &self.u[i]
    }

    pub fn orbitals(&self) -> &[Vec<f64>] {
        &self.u
    }

    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }

    pub fn with_eigenvalues(mut self, e: Vec<f64>) -> Result<Self> {
        check_len(self.len(), e.len())?;
        self.eigenvalues = Some(e);
        Ok(self)
    }

    /// Line density ρ = Σ u_i².
    pub fn density(&self) -> &[f64] {
        &self.rho
    }

    pub fn density_floor(&self) -> f64 {
        RHO_FLOOR_REL * self.rho.iter().fold(0.0f64, |m, &x| m.max(x))
    }

    /// True where ρ is above the floor.
    pub fn support_mask(&self) -> Vec<bool> {
        let fl = self.density_floor();
        self.rho.iter().map(|&x| x > fl).collect()
    }

    pub fn overlap(&self) -> Vec<Vec<f64>> {
        self.u.iter().map(|a| self.u.iter().map(|b| self.grid.inner(a, b)).collect()).collect()
    }

    pub fn orthonormality_error(&self) -> f64 {
        let s = self.overlap();
        let mut dev = 0.0f64;
        for (i, row) in s.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((v - target).abs());
            }
        }
        dev
    }

    /// Φ U, i.e. ũ_j = Σ_i u_i U_ij. Eigenvalues are dropped.
    pub fn rotate(&self, rot: &[Vec<f64>]) -> Result<Self> {
        let n = self.len();
        check_len(n, rot.len())?;
        let mut out = vec![vec![0.0; self.grid.len()]; n];
        for (j, o) in out.iter_mut().enumerate() {
            for i in 0..n {
                check_len(n, rot[i].len())?;
                let c = rot[i][j];
                for (x, u) in o.iter_mut().zip(&self.u[i]) {
                    *x += c * u;
                }
            }
        }
        Self::new(self.grid.clone(), out, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridKind;

    #[test]
    fn random_sets_are_orthonormal() {
        let g = RadialGrid::build(300, 20.0, GridKind::Log).unwrap().shared();
        for seed in 0..5 {
            let phi = OrbitalSet::random(g.clone(), 3, seed).unwrap();
            assert!(phi.orthonormality_error() < 1e-12);
            let n: f64 = g.integrate(phi.density()).unwrap();
            assert!((n - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn scaled_orbital_is_rejected() {
        let g = RadialGrid::build(300, 20.0, GridKind::Log).unwrap().shared();
        let phi = OrbitalSet::random(g.clone(), 1, 1).unwrap();
        let scaled: Vec<f64> = phi.orbital(0).iter().map(|x| x * 1.1f64.sqrt()).collect();
        assert!(matches!(OrbitalSet::new(g, vec![scaled], None), Err(XcError::InvalidOrbitals(_))));
    }
}
