use nalgebra::DMatrix;

use crate::coulomb::coulomb_potential_values;
use crate::error::{check_len, Result};
use crate::orbitals::OrbitalSet;

/// Anything that acts linearly on radial functions in u-representation.
pub trait NonlocalOperator {
    fn apply(&self, u: &[f64]) -> Vec<f64>;
}

/// Multiplication by a grid function, as a stand-in for the exchange operator.
#[derive(Debug, Clone, Copy)]
pub struct Multiplication<'a>(pub &'a [f64]);

impl NonlocalOperator for Multiplication<'_> {
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.0.iter().zip(u).map(|(v, u)| v * u).collect()
    }
}

/// The exchange operator K_Φ of an orbital set with its N×N matrix and pair potentials.
#[derive(Debug, Clone)]
pub struct ExchangeBlock {
    orbitals: OrbitalSet,
    matrix: DMatrix<f64>,
    // V_ij for i <= j, packed row-wise
    pairs: Vec<Vec<f64>>,
}

fn packed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl ExchangeBlock {
    pub fn new(phi: &OrbitalSet) -> Self {
        let n = phi.len();
        let grid = phi.grid();
        let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let f: Vec<f64> = phi.orbital(i).iter().zip(phi.orbital(j)).map(|(a, b)| a * b).collect();
                pairs.push(coulomb_potential_values(grid, &f));
            }
        }
        let mut matrix = DMatrix::zeros(n, n);
        let w = grid.weights();
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for m in 0..n {
                    let (ui, um, v) = (phi.orbital(i), phi.orbital(m), &pairs[packed(n, m, j)]);
                    s += (0..grid.len()).map(|k| w[k] * ui[k] * um[k] * v[k]).sum::<f64>();
                }
                matrix[(i, j)] = -s;
            }
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| if i <= j { matrix[(i, j)] } else { matrix[(j, i)] });
        ExchangeBlock { orbitals: phi.clone(), matrix, pairs }
    }

    pub fn orbitals(&self) -> &OrbitalSet {
        &self.orbitals
    }

    /// K_ij = ⟨φ_i|K_Φ|φ_j⟩.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// V_ij(r) = ∫ u_i u_j / max(r, r') dr'.
    pub fn pair_potential(&self, i: usize, j: usize) -> &[f64] {
        &self.pairs[packed(self.orbitals.len(), i, j)]
    }

    /// Σ_ij u_i u_j V_ij, the numerator of the Slater potential (with a minus sign).
    pub(crate) fn slater_numerator(&self) -> Vec<f64> {
        let n = self.orbitals.len();
        let mut num = vec![0.0; self.orbitals.grid().len()];
        for i in 0..n {
            for j in i..n {
                let f = if i == j { 1.0 } else { 2.0 };
                let (ui, uj, v) = (self.orbitals.orbital(i), self.orbitals.orbital(j), self.pair_potential(i, j));
                for k in 0..num.len() {
                    num[k] += f * ui[k] * uj[k] * v[k];
                }
            }
        }
        num
    }

    pub fn apply_checked(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.orbitals.grid().len(), u.len())?;
        Ok(apply_exchange(&self.orbitals, u))
    }
}

impl NonlocalOperator for ExchangeBlock {
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        apply_exchange(&self.orbitals, u)
    }
}

fn apply_exchange(phi: &OrbitalSet, u: &[f64]) -> Vec<f64> {
    let grid = phi.grid();
    let mut out = vec![0.0; grid.len()];
    for ui in phi.orbitals() {
        let f: Vec<f64> = ui.iter().zip(u).map(|(a, b)| a * b).collect();
        let v = coulomb_potential_values(grid, &f);
        for k in 0..out.len() {
            out[k] -= ui[k] * v[k];
        }
    }
    out
}

/// (K_Φ u)(r) = −Σ_i u_i(r) ∫ u_i(r') u(r') / max(r, r') dr'.
pub fn exchange_apply(phi: &OrbitalSet, u: &[f64]) -> Result<Vec<f64>> {
    check_len(phi.grid().len(), u.len())?;
    Ok(apply_exchange(phi, u))
}

pub fn exchange_matrix(phi: &OrbitalSet) -> ExchangeBlock {
    ExchangeBlock::new(phi)
}
