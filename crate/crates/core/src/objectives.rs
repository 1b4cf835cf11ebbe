//! Hilbert-Schmidt objectives in the s-wave sector, as weighted double sums on the grid.

use serde::Serialize;

use crate::error::{check_len, Result};
use crate::exchange::{ExchangeBlock, NonlocalOperator};
use crate::orbitals::OrbitalSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlaterObjectives {
    /// ½‖(v − K)Υ‖².
    pub i_s: f64,
    /// ½∫∫|v(r)γ(r,r') + γ(r,r')/max(r,r')|².
    pub j_s: f64,
}

/// Both Slater objectives. J_S is a direct O(n²) double sum over the grid.
pub fn objective_slater(phi: &OrbitalSet, v: &[f64]) -> Result<SlaterObjectives> {
    let grid = phi.grid();
    check_len(grid.len(), v.len())?;
    let (r, w, s) = (grid.points(), grid.weights(), grid.steps());
    let n = grid.len();
    let us = phi.orbitals();
    let mut j_s = 0.0;
    let mut gamma_row = vec![0.0; n];
    for k in 0..n {
        gamma_row.iter_mut().for_each(|g| *g = 0.0);
        for u in us {
            let uk = u[k];
            if uk != 0.0 {
                for (g, ul) in gamma_row.iter_mut().zip(u) {
                    *g += uk * ul;
                }
            }
        }
        let mut row = 0.0;
        for l in 0..n {
            let c = if l == k { 1.0 / r[k] - s[k] * s[k] / (12.0 * r[k] * r[k] * w[k]) } else { 1.0 / r[k].max(r[l]) };
            let e = gamma_row[l] * (v[k] + c);
            row += w[l] * e * e;
        }
        j_s += w[k] * row;
    }
    let k = ExchangeBlock::new(phi);
    let norms = residual_blocks(phi, &k, v).norms;
    Ok(SlaterObjectives { i_s: 0.5 * norms, j_s: 0.5 * j_s })
}

/// J_KLI = ½(‖(v − K)Υ‖² − Σ_i ⟨φ_i|(v − K)|φ_i⟩²).
pub fn objective_kli(phi: &OrbitalSet, v: &[f64]) -> Result<f64> {
    check_len(phi.grid().len(), v.len())?;
    let k = ExchangeBlock::new(phi);
    let b = residual_blocks(phi, &k, v);
    let n = phi.len();
    let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| b.m[i][j] * b.m[i][j]).sum();
    Ok(0.5 * (b.projected + off))
}

/// J_ELP = ½‖[v − K, Υ]‖².
pub fn objective_elp(phi: &OrbitalSet, v: &[f64]) -> Result<f64> {
    check_len(phi.grid().len(), v.len())?;
    let k = ExchangeBlock::new(phi);
    Ok(residual_blocks(phi, &k, v).projected)
}

struct ResidualBlocks {
    /// Σ_j ‖(v − K)u_j‖².
    norms: f64,
    /// ⟨u_i|(v − K)|u_j⟩.
    m: Vec<Vec<f64>>,
    /// Σ_j ‖Q(v − K)u_j‖² with Q the projector off the occupied space.
    projected: f64,
}

// For orthonormal orbitals Σ_j ‖Xu_j‖² − Σ_ij M_ij² = Σ_j ‖QXu_j‖². The projected
// form avoids the cancellation and is exactly blind to constants in v.
fn residual_blocks(phi: &OrbitalSet, k: &ExchangeBlock, v: &[f64]) -> ResidualBlocks {
    let grid = phi.grid();
    let cols: Vec<Vec<f64>> = phi
        .orbitals()
        .iter()
        .map(|u| {
            let ku = k.apply(u);
            u.iter().zip(v).zip(&ku).map(|((u, v), ku)| v * u - ku).collect()
        })
        .collect();
    let norms = cols.iter().map(|c| grid.inner(c, c)).sum();
    let m: Vec<Vec<f64>> = phi.orbitals().iter().map(|u| cols.iter().map(|c| grid.inner(u, c)).collect()).collect();
    let mut projected = 0.0;
    for (j, c) in cols.iter().enumerate() {
        let mut y = c.clone();
        for (i, u) in phi.orbitals().iter().enumerate() {
            y.iter_mut().zip(u).for_each(|(y, u)| *y -= m[i][j] * u);
        }
        projected += grid.inner(&y, &y);
    }
    ResidualBlocks { norms, m, projected }
}
