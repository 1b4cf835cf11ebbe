//! Radial Hartree-Fock and local exchange potentials for fully spin-polarized atoms.
//!
//! Orbitals are s-waves stored as u(r) = r φ(r) on a [`RadialGrid`]. The crate
//! builds the nonlocal exchange operator, the Slater, KLI and ELP local
//! potentials, their variational objectives, the OEP residual diagnostic, and
//! self-consistent solvers for all four methods.

pub mod cli;
pub mod coulomb;
mod davidson;
pub mod energetics;
pub mod error;
pub mod exchange;
pub mod grid;
pub mod hamiltonian;
mod linalg;
pub mod objectives;
pub mod oep;
pub mod orbitals;
pub mod potentials;
pub mod scf;
mod tridiag;

pub use coulomb::{coulomb_potential, radial_coulomb};
pub use energetics::{bound_checks, hf_energy, BoundReport, EnergyBreakdown};
pub use error::{Result, XcError};
pub use exchange::{exchange_apply, exchange_matrix, ExchangeBlock, Multiplication, NonlocalOperator};
pub use grid::{GridKind, RadialFunction, RadialGrid};
pub use hamiltonian::{RadialHamiltonian, Spectrum};
pub use linalg::PSEUDO_REL_TOL;
pub use objectives::{objective_elp, objective_kli, objective_slater, SlaterObjectives};
pub use oep::{eigen_shifts, oep_residual, reconstruct_potential, wronskian_residual, OepResidual};
pub use orbitals::OrbitalSet;
pub use potentials::{elp_potential, kli_potential, slater_potential, ElpSolution, Gauge, KliSolution, LocalPotential};
pub use scf::{mix, run_scf, scf_hartree_fock, scf_local, GridSpec, Method, ScfConfig, ScfReport};

/// Lowest N eigenpairs of −½ d²/dr² + W on the grid of `grid`.
pub fn lowest_eigenpairs(grid: std::sync::Arc<RadialGrid>, potential: &[f64], n: usize) -> Result<Spectrum> {
    RadialHamiltonian::new(grid, potential)?.lowest_eigenpairs(n)
}
