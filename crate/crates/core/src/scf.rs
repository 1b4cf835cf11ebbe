use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::coulomb::coulomb_potential_values;
use crate::davidson::davidson;
use crate::energetics::{hf_energy, EnergyBreakdown};
use crate::error::{check_len, Result, XcError};
use crate::exchange::ExchangeBlock;
use crate::grid::{GridKind, RadialGrid, DEFAULT_GRID_N, DEFAULT_RMAX};
use crate::hamiltonian::{fix_sign, RadialHamiltonian};
use crate::orbitals::OrbitalSet;
use crate::potentials::{elp_potential, kli_potential, slater_from_block, Gauge, LocalPotential};
use crate::tridiag::SymTridiag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hf,
    Slater,
    Kli,
    Elp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Hf, Method::Slater, Method::Kli, Method::Elp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hf => "hf",
            Method::Slater => "slater",
            Method::Kli => "kli",
            Method::Elp => "elp",
        }
    }

    /// Gauge used inside the SCF loop when none is requested.
    ///
    /// ELP runs in the homo gauge: with the trace gauge the constant offset of v_x
    /// against the zero value outside the density support destabilizes the iteration.
    pub fn default_gauge(self) -> Gauge {
        match self {
            Method::Hf | Method::Slater => Gauge::None,
            Method::Kli | Method::Elp => Gauge::Homo,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = XcError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| XcError::Usage(format!("unknown method '{s}'; valid methods: hf, slater, kli, elp")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n: usize,
    pub r_max: f64,
    pub kind: GridKind,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: DEFAULT_GRID_N, r_max: DEFAULT_RMAX, kind: GridKind::Log }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<RadialGrid>> {
        Ok(RadialGrid::build(self.n, self.r_max, self.kind)?.shared())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScfConfig {
    pub z: f64,
    pub n_electrons: usize,
    pub method: Method,
    pub mixing: f64,
    pub max_iter: usize,
    pub tol_density: f64,
    pub eta_schedule: Vec<f64>,
    pub grid: GridSpec,
    pub gauge: Option<Gauge>,
}

pub const DEFAULT_MIXING: f64 = 0.3;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_ETA_SCHEDULE: [f64; 4] = [1e-1, 1e-2, 1e-3, 0.0];

impl ScfConfig {
    pub fn new(z: f64, n_electrons: usize, method: Method) -> Self {
        ScfConfig {
            z,
            n_electrons,
            method,
            mixing: DEFAULT_MIXING,
            max_iter: DEFAULT_MAX_ITER,
            tol_density: DEFAULT_TOL,
            eta_schedule: DEFAULT_ETA_SCHEDULE.to_vec(),
            grid: GridSpec::default(),
            gauge: None,
        }
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge.unwrap_or(self.method.default_gauge())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(XcError::Parameter(m));
        if self.n_electrons < 1 {
            return bad("N must be at least 1".into());
        }
        if !(self.z.is_finite() && self.z >= self.n_electrons as f64) {
            return bad(format!("need Z >= N, got Z = {} and N = {}", self.z, self.n_electrons));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return bad(format!("mixing must lie in (0, 1], got {}", self.mixing));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if !(self.tol_density > 0.0) {
            return bad(format!("tol_density must be positive, got {}", self.tol_density));
        }
        let s = &self.eta_schedule;
        if s.is_empty() || *s.last().unwrap() != 0.0 || s.windows(2).any(|p| !(p[0] > p[1])) || s[0] < 0.0 {
            return bad(format!("eta schedule must decrease strictly to 0, got {s:?}"));
        }
        if self.grid.n < self.n_electrons + 16 {
            return bad(format!("grid of {} points is too small", self.grid.n));
        }
        match (self.method, self.gauge()) {
            (Method::Kli, Gauge::Homo | Gauge::Raw) => {}
            (Method::Elp, Gauge::Homo | Gauge::Trace | Gauge::Raw) => {}
            (Method::Hf | Method::Slater, Gauge::None) => {}
            (m, g) => return bad(format!("gauge {g} does not apply to method {m}")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub eta: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ScfReport {
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub stages: Vec<StageReport>,
    pub orbitals: OrbitalSet,
    /// Lowest N+2 eigenvalues of the final mean-field operator.
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    pub energy: EnergyBreakdown,
    /// L¹ density change per iteration, all stages concatenated.
    pub history: Vec<f64>,
    pub nuclear_potential: Vec<f64>,
    pub hartree_potential: Vec<f64>,
    /// Local exchange potential of the final orbitals (the Slater potential for HF).
    pub exchange_potential: LocalPotential,
    /// The local potential W whose eigenfunctions are the orbitals (local methods),
    /// or the local part of the Fock operator with the Slater term (HF).
    pub total_potential: Vec<f64>,
    pub exchange: ExchangeBlock,
    pub gauge: Gauge,
    pub warnings: Vec<String>,
}

/// (1 − θ)·previous + θ·new.
pub fn mix(previous: &[f64], new: &[f64], theta: f64) -> Result<Vec<f64>> {
    check_len(previous.len(), new.len())?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(XcError::Parameter(format!("mixing must lie in [0, 1], got {theta}")));
    }
    if theta == 1.0 {
        return Ok(new.to_vec());
    }
    // written as a correction so that a fixed point is reproduced exactly
    Ok(previous.iter().zip(new).map(|(p, n)| p + theta * (n - p)).collect())
}

fn l1_change(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    grid.weights().iter().zip(a).zip(b).map(|((w, a), b)| w * (a - b).abs()).sum()
}

fn oscillation_warning(history: &[f64], theta: f64) -> Option<String> {
    if history.len() < 20 {
        return None;
    }
    let tail = &history[history.len() - 10..];
    let before = &history[history.len() - 20..history.len() - 10];
    let min_tail = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_before = before.iter().cloned().fold(f64::INFINITY, f64::min);
    (min_tail > 0.5 * min_before).then(|| {
        format!("density residual stalls or oscillates; try a mixing parameter smaller than {theta}")
    })
}

/// Self-consistent Slater, KLI or ELP/CEDA solve with potential mixing.
pub fn scf_local(cfg: &ScfConfig) -> Result<ScfReport> {
    cfg.validate()?;
    if cfg.method == Method::Hf {
        return Err(XcError::Parameter("scf_local handles slater, kli and elp; use scf_hartree_fock".into()));
    }
    let grid = cfg.grid.build()?;
    let n = cfg.n_electrons;
    let r = grid.points().to_vec();
    let gauge = cfg.gauge();
    let etas: Vec<f64> = if cfg.method == Method::Slater { cfg.eta_schedule.clone() } else { vec![0.0] };

    let mut w_in: Vec<f64> = r.iter().map(|r| -cfg.z / r).collect();
    let mut history = Vec::new();
    let mut stages = Vec::new();
    let mut warnings = Vec::new();
    let mut last = None;
    for &eta in &etas {
        let v_nuc: Vec<f64> = r.iter().map(|r| -(cfg.z + eta) / r).collect();
        let mut rho_old: Option<Vec<f64>> = None;
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=cfg.max_iter {
            iterations = it;
            let spec = RadialHamiltonian::new(grid.clone(), &w_in)?.lowest_eigenpairs(n)?;
            let phi = spec.orbitals;
            let k = ExchangeBlock::new(&phi);
            let (v_x, w_x) = gauged_exchange(cfg.method, &phi, &k, eta, gauge)?;
            let v_h = coulomb_potential_values(&grid, phi.density());
            let w_out: Vec<f64> = (0..r.len()).map(|q| v_nuc[q] + v_h[q] + w_x[q]).collect();
            let mut done = false;
            if let Some(old) = &rho_old {
                let res = l1_change(&grid, phi.density(), old);
                history.push(res);
                log::debug!("{} eta={eta} iter {it}: density change {res:e}", cfg.method);
                done = res < cfg.tol_density;
            }
            if done {
                converged = true;
                last = Some((phi, k, v_x, v_h, v_nuc.clone()));
                break;
            }
            rho_old = Some(phi.density().to_vec());
            if it == cfg.max_iter {
                last = Some((phi, k, v_x, v_h, v_nuc.clone()));
            } else {
                w_in = mix(&w_in, &w_out, cfg.mixing)?;
            }
        }
        log::info!("{} eta={eta}: {iterations} iterations, converged={converged}", cfg.method);
        stages.push(StageReport { eta, iterations, converged });
        if !converged {
            warnings.push(format!("stage eta={eta} did not converge in {} iterations", cfg.max_iter));
            if let Some(w) = oscillation_warning(&history, cfg.mixing) {
                warnings.push(w);
            }
            break;
        }
    }
    let (phi, k, v_x, v_h, v_nuc) = last.expect("at least one iteration ran");
    let eigenvalues = RadialHamiltonian::new(grid.clone(), &w_in)?.eigenvalues(n + 2)?;
    let gap = eigenvalues[n] - eigenvalues[n - 1];
    let converged = stages.len() == etas.len() && stages.iter().all(|s| s.converged);
    Ok(ScfReport {
        method: cfg.method,
        converged,
        iterations: stages.iter().map(|s| s.iterations).sum(),
        energy: hf_energy(&phi, cfg.z),
        stages,
        orbitals: phi,
        eigenvalues,
        gap,
        history,
        nuclear_potential: v_nuc,
        hartree_potential: v_h,
        exchange_potential: v_x,
        total_potential: w_in,
        exchange: k,
        gauge,
        warnings,
    })
}

/// The exchange potential in the requested gauge, and the values entering W.
///
/// Potentials vanish where ρ is below the floor, so a gauge constant only shifts
/// the supported region. W instead uses the homo-gauge potential plus the constant
/// everywhere, which moves the spectrum rigidly and leaves the orbitals unchanged.
fn gauged_exchange(method: Method, phi: &OrbitalSet, k: &ExchangeBlock, eta: f64, gauge: Gauge) -> Result<(LocalPotential, Vec<f64>)> {
    let ((v_homo, l_homo), other) = match method {
        Method::Slater => {
            let v = slater_from_block(k, eta);
            let w = v.values().to_vec();
            return Ok((v, w));
        }
        Method::Kli => {
            let (v, sol) = kli_potential(phi, k, Gauge::Homo)?;
            let other = if gauge == Gauge::Homo { None } else { Some(kli_potential(phi, k, gauge).map(|(p, s)| (p, s.lambda))?) };
            ((v, sol.lambda), other)
        }
        Method::Elp => {
            let (v, sol) = elp_potential(phi, k, Gauge::Homo)?;
            let other = if gauge == Gauge::Homo { None } else { Some(elp_potential(phi, k, gauge).map(|(p, s)| (p, s.lambda))?) };
            ((v, sol.lambda), other)
        }
        Method::Hf => unreachable!("local exchange requested for hf"),
    };
    match other {
        None => {
            let w = v_homo.values().to_vec();
            Ok((v_homo, w))
        }
        Some((v, l)) => {
            let w = v_homo.values().iter().map(|x| x + (l - l_homo)).collect();
            Ok((v, w))
        }
    }
}

/// Residual tolerances of the inner Fock eigensolve (Euclidean, on √w u) for
/// occupied and virtual states. Virtual eigenvalues only enter the aufbau gap.
const FOCK_TOL: f64 = 1e-9;
const FOCK_TOL_VIRTUAL: f64 = 1e-6;
const FOCK_MAX_ITER: usize = 400;
/// Natural occupations below this are dropped from the mixed density matrix.
const OCC_CUTOFF: f64 = 1e-13;

/// Density matrix Σ_a n_a v_a v_a in natural-orbital form.
struct MixedDensity {
    occ: Vec<f64>,
    vecs: Vec<Vec<f64>>,
}

impl MixedDensity {
    fn density(&self, len: usize) -> Vec<f64> {
        let mut rho = vec![0.0; len];
        for (n, v) in self.occ.iter().zip(&self.vecs) {
            rho.iter_mut().zip(v).for_each(|(p, x)| *p += n * x * x);
        }
        rho
    }

    /// (1 − θ) γ + θ Σ_i u_i u_i, re-diagonalized in the quadrature metric.
    fn mix(&self, grid: &RadialGrid, new: &[Vec<f64>], theta: f64) -> MixedDensity {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (n, v) in self.occ.iter().zip(&self.vecs) {
            let s = ((1.0 - theta) * n).sqrt();
            rows.push(v.iter().map(|x| s * x).collect());
        }
        for u in new {
            let s = theta.sqrt();
            rows.push(u.iter().map(|x| s * x).collect());
        }
        let d = rows.len();
        let gram = DMatrix::from_fn(d, d, |i, j| grid.inner(&rows[i], &rows[j]));
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut occ = Vec::new();
        let mut vecs = Vec::new();
        for c in order {
            let lam = eig.eigenvalues[c];
            if lam <= OCC_CUTOFF {
                continue;
            }
            let mut v = vec![0.0; grid.len()];
            for (j, row) in rows.iter().enumerate() {
                let s = eig.eigenvectors[(j, c)] / lam.sqrt();
                v.iter_mut().zip(row).for_each(|(a, b)| *a += s * b);
            }
            occ.push(lam);
            vecs.push(v);
        }
        let total: f64 = occ.iter().sum();
        let target = new.len() as f64;
        occ.iter_mut().for_each(|n| *n *= target / total);
        MixedDensity { occ, vecs }
    }
}

/// Radial Hartree-Fock with damped density-matrix mixing.
///
/// Each step finds the lowest N+2 eigenpairs of the Fock operator built from the
/// mixed density matrix with a block Davidson solver; the exchange term is applied
/// through the Coulomb prefix sums instead of assembling a dense n×n kernel.
pub fn scf_hartree_fock(cfg: &ScfConfig) -> Result<ScfReport> {
    cfg.validate()?;
    if cfg.method != Method::Hf {
        return Err(XcError::Parameter("scf_hartree_fock needs method hf".into()));
    }
    let grid = cfg.grid.build()?;
    let n = cfg.n_electrons;
    let npts = grid.len();
    let m = grid.interior();
    let r = grid.points().to_vec();
    let v_nuc: Vec<f64> = r.iter().map(|r| -cfg.z / r).collect();
    let h0 = RadialHamiltonian::new(grid.clone(), &v_nuc)?;
    let sw = h0.sqrt_weights().to_vec();
    let kin = h0.kinetic_part().clone();
    let start = h0.lowest_eigenpairs(n)?;
    let mut gamma = MixedDensity { occ: vec![1.0; n], vecs: start.orbitals.orbitals().to_vec() };

    let mut block: Option<Vec<Vec<f64>>> = None;
    let mut rho_old: Option<Vec<f64>> = None;
    let mut history = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut eigenvalues = Vec::new();
    let mut occupied: Vec<Vec<f64>> = Vec::new();
    let k_states = n + 2;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let rho = gamma.density(npts);
        let v_h = coulomb_potential_values(&grid, &rho);
        let w_loc: Vec<f64> = (0..m).map(|q| v_nuc[q] + v_h[q]).collect();
        let v_s = mixed_slater(&grid, &gamma, &rho);
        let pre_d: Vec<f64> = (0..m).map(|q| kin.d[q] + w_loc[q] + v_s[q]).collect();
        let pre = SymTridiag::new(pre_d, kin.o.clone());

        let apply = |y: &[f64]| -> Vec<f64> {
            let mut out = kin.matvec(y);
            for q in 0..m {
                out[q] += w_loc[q] * y[q];
            }
            let mut u = vec![0.0; npts];
            for q in 0..m {
                u[q] = y[q] / sw[q];
            }
            for (occ, v) in gamma.occ.iter().zip(&gamma.vecs) {
                let f: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a * b).collect();
                let pot = coulomb_potential_values(&grid, &f);
                for q in 0..m {
                    out[q] -= occ * sw[q] * v[q] * pot[q];
                }
            }
            out
        };
        let guess = match block.take() {
            Some(b) => b,
            None => {
                let mut p = vec![0.0; npts];
                p[..m].copy_from_slice(&v_s[..m]);
                for q in 0..m {
                    p[q] += w_loc[q];
                }
                let s = RadialHamiltonian::new(grid.clone(), &p)?.lowest_eigenpairs(k_states)?;
                s.orbitals.orbitals().iter().map(|u| (0..m).map(|q| u[q] * sw[q]).collect()).collect()
            }
        };
        let tols: Vec<f64> = (0..k_states).map(|c| if c < n { FOCK_TOL } else { FOCK_TOL_VIRTUAL }).collect();
        let dav = davidson(&apply, &pre, guess, &tols, FOCK_MAX_ITER);
        if !dav.converged {
            warnings.push(format!("Fock eigensolve at iteration {it} stopped after {} steps, residual/tol {:e}", dav.iterations, dav.residual));
        }
        eigenvalues = dav.values.clone();
        occupied = dav.vectors[..n]
            .iter()
            .map(|y| {
                let mut u = vec![0.0; npts];
                for q in 0..m {
                    u[q] = y[q] / sw[q];
                }
                fix_sign(&mut u);
                u
            })
            .collect();
        block = Some(dav.vectors);
        let mut rho_new = vec![0.0; npts];
        for u in &occupied {
            rho_new.iter_mut().zip(u).for_each(|(p, x)| *p += x * x);
        }
        if let Some(old) = &rho_old {
            let res = l1_change(&grid, &rho_new, old);
            history.push(res);
            log::debug!("hf iter {it}: density change {res:e}, davidson steps {}", dav.iterations);
            if res < cfg.tol_density {
                converged = true;
                break;
            }
        }
        rho_old = Some(rho_new);
        if it < cfg.max_iter {
            gamma = gamma.mix(&grid, &occupied, cfg.mixing);
        }
    }
    if !converged {
        warnings.push(format!("hf did not converge in {} iterations", cfg.max_iter));
        if let Some(w) = oscillation_warning(&history, cfg.mixing) {
            warnings.push(w);
        }
    }
    let phi = OrbitalSet::new(grid.clone(), occupied, Some(eigenvalues[..n].to_vec()))
        .map_err(|e| XcError::Numerical(format!("Fock eigenvectors failed validation: {e}")))?;
    let k = ExchangeBlock::new(&phi);
    let v_x = slater_from_block(&k, 0.0);
    let v_h = coulomb_potential_values(&grid, phi.density());
    let total: Vec<f64> = (0..npts).map(|q| v_nuc[q] + v_h[q] + v_x.values()[q]).collect();
    let gap = eigenvalues[n] - eigenvalues[n - 1];
    Ok(ScfReport {
        method: Method::Hf,
        converged,
        iterations,
        stages: vec![StageReport { eta: 0.0, iterations, converged }],
        energy: hf_energy(&phi, cfg.z),
        orbitals: phi,
        eigenvalues,
        gap,
        history,
        nuclear_potential: v_nuc,
        hartree_potential: v_h,
        exchange_potential: v_x,
        total_potential: total,
        exchange: k,
        gauge: Gauge::None,
        warnings,
    })
}

/// Slater potential of a mixed density matrix, used only to precondition.
fn mixed_slater(grid: &RadialGrid, gamma: &MixedDensity, rho: &[f64]) -> Vec<f64> {
    let npts = grid.len();
    let mut num = vec![0.0; npts];
    let d = gamma.vecs.len();
    for a in 0..d {
        for b in a..d {
            let f: Vec<f64> = gamma.vecs[a].iter().zip(&gamma.vecs[b]).map(|(x, y)| x * y).collect();
            let pot = coulomb_potential_values(grid, &f);
            let c = gamma.occ[a] * gamma.occ[b] * if a == b { 1.0 } else { 2.0 };
            for q in 0..npts {
                num[q] += c * f[q] * pot[q];
            }
        }
    }
    let floor = crate::orbitals::RHO_FLOOR_REL * rho.iter().fold(0.0f64, |m, &x| m.max(x));
    (0..npts).map(|q| if rho[q] > floor { -num[q] / rho[q] } else { 0.0 }).collect()
}

/// Dispatch on the configured method.
pub fn run_scf(cfg: &ScfConfig) -> Result<ScfReport> {
    match cfg.method {
        Method::Hf => scf_hartree_fock(cfg),
        _ => scf_local(cfg),
    }
}
