//! Radial Coulomb kernel 1/max(r, r') for s-wave densities.

use crate::error::{check_len, Result};
use crate::grid::RadialGrid;

/// V(r_k) = ∫ f(r')/max(r_k, r') dr' by prefix sums.
///
/// The trapezoid-type rule misses the kink of the kernel at r' = r; the last term
/// is the matching Euler-Maclaurin correction, which makes the rule second order.
pub fn coulomb_potential_values(grid: &RadialGrid, f: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let (r, w, s) = (grid.points(), grid.weights(), grid.steps());
    let mut out = vec![0.0; n];
    let mut inner = 0.0;
    for k in 0..n {
        inner += w[k] * f[k];
        out[k] = inner / r[k];
    }
    let mut outer = 0.0;
    for k in (0..n).rev() {
        out[k] += outer - s[k] * s[k] * f[k] / (12.0 * r[k] * r[k]);
        outer += w[k] * f[k] / r[k];
    }
    out
}

pub fn coulomb_potential(grid: &RadialGrid, f: &[f64]) -> Result<Vec<f64>> {
    check_len(grid.len(), f.len())?;
    Ok(coulomb_potential_values(grid, f))
}

/// ∫∫ f(r) g(r') / max(r, r') dr dr'.
pub fn radial_coulomb(grid: &RadialGrid, f: &[f64], g: &[f64]) -> Result<f64> {
    check_len(grid.len(), f.len())?;
    check_len(grid.len(), g.len())?;
    let vf = coulomb_potential_values(grid, f);
    let vg = coulomb_potential_values(grid, g);
    // average of both orders keeps the value symmetric to rounding
    Ok(0.5 * (grid.inner(f, &vg) + grid.inner(g, &vf)))
}

/// Dense kernel matrix C with ∫∫ f g / max = Σ_kl w_k f_k C_kl w_l g_l.
/// O(n²); meant for small grids and cross-checks.
pub fn coulomb_kernel_dense(grid: &RadialGrid) -> Vec<Vec<f64>> {
    let (r, w, s) = (grid.points(), grid.weights(), grid.steps());
    let n = grid.len();
    (0..n)
        .map(|k| {
            (0..n)
                .map(|l| {
                    let c = 1.0 / r[k].max(r[l]);
                    if k == l {
                        c - s[k] * s[k] / (12.0 * r[k] * r[k] * w[k])
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect()
}
