use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, XcError};
use crate::exchange::ExchangeBlock;
use crate::grid::RadialGrid;
use crate::linalg::sym_pseudo_solve;
use crate::orbitals::OrbitalSet;

/// Convention fixing the free additive constant of KLI/ELP potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    /// No constant is free (Slater, Coulomb, nuclear potentials).
    None,
    /// Shift so the HOMO term vanishes: α_N = K_NN (KLI) or M_NN = K_NN (ELP).
    Homo,
    /// Tr M = 0 (ELP).
    Trace,
    /// Whatever the minimum-norm solve returns.
    Raw,
}

impl std::str::FromStr for Gauge {
    type Err = XcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Gauge::None),
            "homo" => Ok(Gauge::Homo),
            "trace" => Ok(Gauge::Trace),
            "raw" => Ok(Gauge::Raw),
            _ => Err(XcError::Parameter(format!("unknown gauge '{s}' (homo|trace|raw)"))),
        }
    }
}

impl std::fmt::Display for Gauge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Gauge::None => "none",
            Gauge::Homo => "homo",
            Gauge::Trace => "trace",
            Gauge::Raw => "raw",
        };
        f.write_str(s)
    }
}

/// Fraction of r_max bounding the window used for the c/r tail fit.
pub const TAIL_WINDOW: (f64, f64) = (0.5, 0.9);

/// A multiplicative potential sampled on the grid.
#[derive(Debug, Clone)]
pub struct LocalPotential {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    gauge: Gauge,
    c_tail: Option<f64>,
}

impl LocalPotential {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, gauge: Gauge) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(XcError::Numerical(format!("potential is not finite at grid index {k}")));
        }
        let c_tail = tail_coefficient(&grid, &values);
        Ok(LocalPotential { grid, values, gauge, c_tail })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    /// Least-squares c in v ≈ c/r over the outer window, skipping points where v is
    /// exactly 0. `None` when no such point lies in the window.
    pub fn tail_coefficient(&self) -> Option<f64> {
        self.c_tail
    }
}

pub fn tail_coefficient(grid: &RadialGrid, v: &[f64]) -> Option<f64> {
    let (a, b) = (TAIL_WINDOW.0 * grid.r_max(), TAIL_WINDOW.1 * grid.r_max());
    let (mut num, mut den) = (0.0, 0.0);
    for (&r, &x) in grid.points().iter().zip(v) {
        if r >= a && r <= b && x != 0.0 {
            num += x / r;
            den += 1.0 / (r * r);
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Regularized Slater potential −Σ_ij u_i u_j V_ij / (ρ + η).
///
/// With η = 0 the value is set to 0 wherever ρ is below the density floor.
pub fn slater_potential(phi: &OrbitalSet, eta: f64) -> Result<LocalPotential> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(XcError::Parameter(format!("eta must be a nonnegative number, got {eta}")));
    }
    Ok(slater_from_block(&ExchangeBlock::new(phi), eta))
}

pub(crate) fn slater_from_block(k: &ExchangeBlock, eta: f64) -> LocalPotential {
    let phi = k.orbitals();
    let rho = phi.density();
    let num = k.slater_numerator();
    let mask = phi.support_mask();
    let values = (0..rho.len())
        .map(|i| if eta > 0.0 { -num[i] / (rho[i] + eta) } else if mask[i] { -num[i] / rho[i] } else { 0.0 })
        .collect();
    LocalPotential::new(phi.grid().clone(), values, Gauge::None).expect("slater values are finite")
}

#[derive(Debug, Clone)]
pub struct KliSolution {
    pub alpha: DVector<f64>,
    pub s: DMatrix<f64>,
    pub beta: DVector<f64>,
    /// Constant added to the minimum-norm α by the gauge.
    pub lambda: f64,
    /// ‖(I − S)α − β‖.
    pub residual: f64,
}

/// KLI potential v_S + Σ_i (α_i − K_ii) u_i²/ρ with (I − S)α = β.
pub fn kli_potential(phi: &OrbitalSet, k: &ExchangeBlock, gauge: Gauge) -> Result<(LocalPotential, KliSolution)> {
    if !matches!(gauge, Gauge::Homo | Gauge::Raw) {
        return Err(XcError::Parameter(format!("KLI supports gauges homo and raw, not {gauge}")));
    }
    let n = phi.len();
    let grid = phi.grid();
    let w = grid.weights();
    let rho = phi.density();
    let mask = phi.support_mask();
    let kmat = k.matrix();
    let vs = slater_from_block(k, 0.0);

    let sq: Vec<Vec<f64>> = phi.orbitals().iter().map(|u| u.iter().map(|x| x * x).collect()).collect();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..rho.len()).filter(|&q| mask[q]).map(|q| w[q] * sq[i][q] * sq[j][q] / rho[q]).sum();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let kdiag = DVector::from_fn(n, |i, _| kmat[(i, i)]);
    let proj = DVector::from_fn(n, |i, _| grid.inner(vs.values(), &sq[i]));
    let beta = &proj - &s * &kdiag;
    let a = DMatrix::identity(n, n) - &s;
    let sol = sym_pseudo_solve(&a, &beta, 1.0);
    if sol.kernel.len() != 1 {
        return Err(XcError::DegenerateDensity(sol.kernel.len()));
    }
    let mut alpha = sol.x;
    let lambda = match gauge {
        Gauge::Homo => kmat[(n - 1, n - 1)] - alpha[n - 1],
        _ => 0.0,
    };
    alpha.add_scalar_mut(lambda);
    let residual = (&a * &alpha - &beta).norm();

    let mut v = vs.into_values();
    for q in 0..v.len() {
        if mask[q] {
            v[q] += (0..n).map(|i| (alpha[i] - kmat[(i, i)]) * sq[i][q]).sum::<f64>() / rho[q];
        }
    }
    let pot = LocalPotential::new(grid.clone(), v, gauge)?;
    Ok((pot, KliSolution { alpha, s, beta, lambda, residual }))
}

#[derive(Debug, Clone)]
pub struct ElpSolution {
    pub m: DMatrix<f64>,
    /// A_{kl,ij} = ∫ u_i u_j u_k u_l / ρ, stored at row k·N+l, column i·N+j.
    pub a: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// Multiple of the identity added to the minimum-norm M by the gauge.
    pub lambda: f64,
    /// ‖(I − A)M − G‖_F.
    pub residual: f64,
}

impl ElpSolution {
    /// (I − A) applied to an N×N matrix.
    pub fn apply_system(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let ax = &self.a * DVector::from_iterator(n * n, (0..n * n).map(|p| x[(p / n, p % n)]));
        DMatrix::from_fn(n, n, |k, l| x[(k, l)] - ax[k * n + l])
    }
}

/// ELP potential v_S + Σ_ij (M_ij − K_ij) u_i u_j/ρ with (I − A)M = G.
pub fn elp_potential(phi: &OrbitalSet, k: &ExchangeBlock, gauge: Gauge) -> Result<(LocalPotential, ElpSolution)> {
    if gauge == Gauge::None {
        return Err(XcError::Parameter("ELP needs a gauge (trace, homo or raw)".into()));
    }
    let n = phi.len();
    let grid = phi.grid();
    let w = grid.weights();
    let rho = phi.density();
    let mask = phi.support_mask();
    let kmat = k.matrix();
    let vs = slater_from_block(k, 0.0);
    let npts = rho.len();

    // pair products u_i u_j for all ordered pairs
    let prod = |i: usize, j: usize| -> Vec<f64> {
        let (ui, uj) = (phi.orbital(i), phi.orbital(j));
        (0..npts).map(|q| ui[q] * uj[q]).collect()
    };
    let prods: Vec<Vec<f64>> = (0..n * n).map(|p| prod(p / n, p % n)).collect();
    let mut a = DMatrix::zeros(n * n, n * n);
    for p in 0..n * n {
        for q in p..n * n {
            let v: f64 = (0..npts).filter(|&x| mask[x]).map(|x| w[x] * prods[p][x] * prods[q][x] / rho[x]).sum();
            a[(p, q)] = v;
            a[(q, p)] = v;
        }
    }
    let kvec = DVector::from_iterator(n * n, (0..n * n).map(|p| kmat[(p / n, p % n)]));
    let ak = &a * &kvec;
    let g = DMatrix::from_fn(n, n, |i, j| grid.inner(vs.values(), &prods[i * n + j]) - ak[i * n + j]);
    let g = 0.5 * (&g + g.transpose());

    // orthonormal basis of symmetric matrices: E_ii and (E_ij + E_ji)/√2
    let basis: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let coef = |(i, j): (usize, usize)| if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
    let nb = basis.len();
    let mut sys = DMatrix::zeros(nb, nb);
    for (x, &bx) in basis.iter().enumerate() {
        for (y, &by) in basis.iter().enumerate() {
            let mut v = 0.0;
            for &(k1, l1) in &sym_entries(bx) {
                for &(i1, j1) in &sym_entries(by) {
                    v += a[(k1 * n + l1, i1 * n + j1)];
                }
            }
            sys[(x, y)] = if x == y { 1.0 } else { 0.0 } - coef(bx) * coef(by) * v;
        }
    }
    let rhs = DVector::from_iterator(nb, basis.iter().map(|&(i, j)| coef((i, j)) * if i == j { g[(i, i)] } else { 2.0 * g[(i, j)] }));
    let sol = sym_pseudo_solve(&sys, &rhs, 1.0);
    if sol.kernel.len() != 1 {
        return Err(XcError::DisconnectedDensity(sol.kernel.len()));
    }
    let mut m = DMatrix::zeros(n, n);
    for (x, &(i, j)) in basis.iter().enumerate() {
        let c = coef((i, j)) * sol.x[x];
        m[(i, j)] = c;
        m[(j, i)] = c;
    }
    let lambda = match gauge {
        Gauge::Trace => -m.trace() / n as f64,
        Gauge::Homo => kmat[(n - 1, n - 1)] - m[(n - 1, n - 1)],
        _ => 0.0,
    };
    for i in 0..n {
        m[(i, i)] += lambda;
    }

    let mut v = vs.into_values();
    for q in 0..npts {
        if mask[q] {
            let mut s = 0.0;
            for p in 0..n * n {
                s += (m[(p / n, p % n)] - kmat[(p / n, p % n)]) * prods[p][q];
            }
            v[q] += s / rho[q];
        }
    }
    let mut out = ElpSolution { m, a, g, lambda, residual: 0.0 };
    out.residual = (out.apply_system(&out.m) - &out.g).norm();
    let pot = LocalPotential::new(grid.clone(), v, gauge)?;
    Ok((pot, out))
}

fn sym_entries((i, j): (usize, usize)) -> Vec<(usize, usize)> {
    if i == j {
        vec![(i, i)]
    } else {
        vec![(i, j), (j, i)]
    }
}
