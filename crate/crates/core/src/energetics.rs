use serde::Serialize;

use crate::coulomb::coulomb_potential_values;
use crate::grid::RadialGrid;
use crate::orbitals::OrbitalSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub nuclear: f64,
    pub hartree: f64,
    pub exchange: f64,
    pub total: f64,
}

/// E^HF(Φ) and its four terms.
pub fn hf_energy(phi: &OrbitalSet, z: f64) -> EnergyBreakdown {
    let grid = phi.grid();
    let rho = phi.density();
    let kinetic: f64 = phi.orbitals().iter().map(|u| grid.kinetic(u)).sum();
    let nuclear = -z * density_moment(grid, rho);
    let hartree = 0.5 * grid.inner(rho, &coulomb_potential_values(grid, rho));
    let exchange = -0.5 * exchange_integral(grid, phi.orbitals());
    EnergyBreakdown { kinetic, nuclear, hartree, exchange, total: kinetic + nuclear + hartree + exchange }
}

fn density_moment(grid: &RadialGrid, rho: &[f64]) -> f64 {
    grid.points().iter().zip(rho).zip(grid.weights()).map(|((r, p), w)| w * p / r).sum()
}

/// Σ_ij ∫∫ u_i u_j u_i' u_j' / max(r, r').
fn exchange_integral(grid: &RadialGrid, us: &[Vec<f64>]) -> f64 {
    let mut x = 0.0;
    for i in 0..us.len() {
        for j in i..us.len() {
            let f: Vec<f64> = us[i].iter().zip(&us[j]).map(|(a, b)| a * b).collect();
            let v = grid.inner(&f, &coulomb_potential_values(grid, &f));
            x += if i == j { v } else { 2.0 * v };
        }
    }
    x
}

/// Both sides of the a-priori inequalities bounding the Coulomb terms by the kinetic energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    /// ∫ρ/r.
    pub nuclear_lhs: f64,
    /// N^{1/2} (2T)^{1/2}.
    pub nuclear_rhs: f64,
    /// ∫∫|γ|²/max(r,r').
    pub exchange_integral: f64,
    /// ∫∫ρρ'/max(r,r').
    pub hartree_integral: f64,
    /// N^{3/2} (2T)^{1/2}.
    pub hartree_rhs: f64,
}

/// Relative slack allowed for discretization error in the saturating nuclear bound.
pub const BOUND_SLACK: f64 = 1e-5;

impl BoundReport {
    pub fn nuclear_margin(&self) -> f64 {
        self.nuclear_rhs - self.nuclear_lhs
    }

    pub fn exchange_margin(&self) -> f64 {
        self.hartree_integral - self.exchange_integral
    }

    pub fn hartree_margin(&self) -> f64 {
        self.hartree_rhs - self.hartree_integral
    }

    pub fn satisfied(&self) -> bool {
        let scale = |x: f64| BOUND_SLACK * x.abs() + 1e-12;
        self.nuclear_margin() >= -scale(self.nuclear_rhs)
            && self.exchange_margin() >= -scale(self.hartree_integral)
            && self.hartree_margin() >= -scale(self.hartree_rhs)
    }
}

pub fn bound_checks(phi: &OrbitalSet) -> BoundReport {
    bound_checks_raw(phi.grid(), phi.orbitals())
}

/// Bound checks on arbitrary (possibly empty) orbital lists.
pub fn bound_checks_raw(grid: &RadialGrid, us: &[Vec<f64>]) -> BoundReport {
    let n = grid.len();
    let mut rho = vec![0.0; n];
    for u in us {
        for (p, x) in rho.iter_mut().zip(u) {
            *p += x * x;
        }
    }
    let t: f64 = us.iter().map(|u| grid.kinetic(u)).sum();
    let ne = us.len() as f64;
    BoundReport {
        nuclear_lhs: density_moment(grid, &rho),
        nuclear_rhs: ne.sqrt() * (2.0 * t).sqrt(),
        exchange_integral: exchange_integral(grid, us),
        hartree_integral: grid.inner(&rho, &coulomb_potential_values(grid, &rho)),
        hartree_rhs: ne.powf(1.5) * (2.0 * t).sqrt(),
    }
}
