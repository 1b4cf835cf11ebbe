//! Python bindings. Grid functions cross the boundary as lists of floats
//! (any float sequence, including numpy arrays, is accepted on input).

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use xcpot_core as core;
use xcpot_core::{Gauge, GridKind, Method, NonlocalOperator, XcError};

fn err(e: XcError) -> PyErr {
    match e {
        XcError::Parameter(_) | XcError::Shape { .. } | XcError::InvalidOrbitals(_) | XcError::Usage(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = XcError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[pyclass(name = "RadialGrid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(Arc<core::RadialGrid>);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n = core::grid::DEFAULT_GRID_N, r_max = core::grid::DEFAULT_RMAX, kind = "log"))]
    fn new(n: usize, r_max: f64, kind: &str) -> PyResult<Self> {
        let kind: GridKind = parse(kind)?;
        Ok(PyGrid(core::RadialGrid::build(n, r_max, kind).map_err(err)?.shared()))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn r_max(&self) -> f64 {
        self.0.r_max()
    }

    #[getter]
    fn points(&self) -> Vec<f64> {
        self.0.points().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn integrate(&self, f: Vec<f64>) -> PyResult<f64> {
        self.0.integrate(&f).map_err(err)
    }

    fn coulomb_potential(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        core::coulomb_potential(&self.0, &f).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("RadialGrid(n={}, r_max={}, kind='{:?}')", self.0.len(), self.0.r_max(), self.0.kind())
    }
}

#[pyclass(name = "OrbitalSet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyOrbitals(core::OrbitalSet);

#[pymethods]
impl PyOrbitals {
    #[new]
    #[pyo3(signature = (grid, u, eigenvalues = None))]
    fn new(grid: &PyGrid, u: Vec<Vec<f64>>, eigenvalues: Option<Vec<f64>>) -> PyResult<Self> {
        Ok(PyOrbitals(core::OrbitalSet::new(grid.0.clone(), u, eigenvalues).map_err(err)?))
    }

    /// Smooth random orthonormal set, deterministic in `seed`.
    #[staticmethod]
    fn random(grid: &PyGrid, n: usize, seed: u64) -> PyResult<Self> {
        Ok(PyOrbitals(core::OrbitalSet::random(grid.0.clone(), n, seed).map_err(err)?))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid().clone())
    }

    #[getter]
    fn orbitals(&self) -> Vec<Vec<f64>> {
        self.0.orbitals().to_vec()
    }

    #[getter]
    fn eigenvalues(&self) -> Option<Vec<f64>> {
        self.0.eigenvalues().map(<[f64]>::to_vec)
    }

    #[getter]
    fn density(&self) -> Vec<f64> {
        self.0.density().to_vec()
    }

    fn orthonormality_error(&self) -> f64 {
        self.0.orthonormality_error()
    }
}

#[pyclass(name = "LocalPotential", frozen)]
struct PyPotential(core::LocalPotential);

#[pymethods]
impl PyPotential {
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn gauge(&self) -> String {
        self.0.gauge().to_string()
    }

    #[getter]
    fn tail_coefficient(&self) -> Option<f64> {
        self.0.tail_coefficient()
    }
}

#[pyclass(name = "ExchangeBlock", frozen)]
struct PyExchange(core::ExchangeBlock);

#[pymethods]
impl PyExchange {
    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(self.0.matrix())
    }

    fn apply(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.apply_checked(&u).map_err(err)
    }

    fn pair_potential(&self, i: usize, j: usize) -> PyResult<Vec<f64>> {
        let n = self.0.orbitals().len();
        if i >= n || j >= n {
            return Err(PyValueError::new_err(format!("orbital index out of range for N = {n}")));
        }
        Ok(self.0.pair_potential(i, j).to_vec())
    }
}

#[pyclass(name = "KliSolution", frozen, get_all)]
struct PyKli {
    alpha: Vec<f64>,
    s: Vec<Vec<f64>>,
    beta: Vec<f64>,
    lambda_: f64,
    residual: f64,
}

#[pyclass(name = "ElpSolution", frozen, get_all)]
struct PyElp {
    m: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    lambda_: f64,
    residual: f64,
}

#[pyclass(name = "EnergyBreakdown", frozen, skip_from_py_object, get_all)]
#[derive(Clone)]
struct PyEnergy {
    kinetic: f64,
    nuclear: f64,
    hartree: f64,
    exchange: f64,
    total: f64,
}

impl From<core::EnergyBreakdown> for PyEnergy {
    fn from(e: core::EnergyBreakdown) -> Self {
        PyEnergy { kinetic: e.kinetic, nuclear: e.nuclear, hartree: e.hartree, exchange: e.exchange, total: e.total }
    }
}

#[pymethods]
impl PyEnergy {
    fn __repr__(&self) -> String {
        format!(
            "EnergyBreakdown(kinetic={}, nuclear={}, hartree={}, exchange={}, total={})",
            self.kinetic, self.nuclear, self.hartree, self.exchange, self.total
        )
    }
}

#[pyclass(name = "BoundReport", frozen, get_all)]
struct PyBounds {
    nuclear_lhs: f64,
    nuclear_rhs: f64,
    exchange_integral: f64,
    hartree_integral: f64,
    hartree_rhs: f64,
    satisfied: bool,
}

#[pyclass(name = "OepResidual", frozen, get_all)]
struct PyOep {
    values: Vec<f64>,
    integral: f64,
    l2_norm: f64,
    rhs_norms: Vec<f64>,
    iterations: Vec<usize>,
}

#[pyclass(name = "ScfResult", frozen, get_all)]
struct PyScf {
    method: String,
    converged: bool,
    iterations: usize,
    orbitals: PyOrbitals,
    eigenvalues: Vec<f64>,
    gap: f64,
    energy: PyEnergy,
    history: Vec<f64>,
    nuclear_potential: Vec<f64>,
    hartree_potential: Vec<f64>,
    exchange_potential: Vec<f64>,
    total_potential: Vec<f64>,
    tail_coefficient: Option<f64>,
    warnings: Vec<String>,
}

/// Lowest n eigenpairs of −½ d²/dr² + W; returns (orbitals, gap or None).
#[pyfunction]
fn lowest_eigenpairs(grid: &PyGrid, potential: Vec<f64>, n: usize) -> PyResult<(PyOrbitals, Option<f64>)> {
    let s = core::lowest_eigenpairs(grid.0.clone(), &potential, n).map_err(err)?;
    let gap = s.gap();
    Ok((PyOrbitals(s.orbitals), gap))
}

#[pyfunction]
fn exchange_matrix(phi: &PyOrbitals) -> PyExchange {
    PyExchange(core::exchange_matrix(&phi.0))
}

#[pyfunction]
#[pyo3(signature = (phi, eta = 0.0))]
fn slater_potential(phi: &PyOrbitals, eta: f64) -> PyResult<PyPotential> {
    Ok(PyPotential(core::slater_potential(&phi.0, eta).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (phi, gauge = "homo"))]
fn kli_potential(phi: &PyOrbitals, gauge: &str) -> PyResult<(PyPotential, PyKli)> {
    let k = core::exchange_matrix(&phi.0);
    let (v, s) = core::kli_potential(&phi.0, &k, parse(gauge)?).map_err(err)?;
    let sol = PyKli {
        alpha: s.alpha.iter().copied().collect(),
        s: rows(&s.s),
        beta: s.beta.iter().copied().collect(),
        lambda_: s.lambda,
        residual: s.residual,
    };
    Ok((PyPotential(v), sol))
}

#[pyfunction]
#[pyo3(signature = (phi, gauge = "trace"))]
fn elp_potential(phi: &PyOrbitals, gauge: &str) -> PyResult<(PyPotential, PyElp)> {
    let k = core::exchange_matrix(&phi.0);
    let (v, s) = core::elp_potential(&phi.0, &k, parse(gauge)?).map_err(err)?;
    Ok((PyPotential(v), PyElp { m: rows(&s.m), g: rows(&s.g), lambda_: s.lambda, residual: s.residual }))
}

/// (I_S, J_S) for a potential v.
#[pyfunction]
fn objective_slater(phi: &PyOrbitals, v: Vec<f64>) -> PyResult<(f64, f64)> {
    let o = core::objective_slater(&phi.0, &v).map_err(err)?;
    Ok((o.i_s, o.j_s))
}

#[pyfunction]
fn objective_kli(phi: &PyOrbitals, v: Vec<f64>) -> PyResult<f64> {
    core::objective_kli(&phi.0, &v).map_err(err)
}

#[pyfunction]
fn objective_elp(phi: &PyOrbitals, v: Vec<f64>) -> PyResult<f64> {
    core::objective_elp(&phi.0, &v).map_err(err)
}

#[pyfunction]
fn hf_energy(phi: &PyOrbitals, z: f64) -> PyEnergy {
    core::hf_energy(&phi.0, z).into()
}

#[pyfunction]
fn bound_checks(phi: &PyOrbitals) -> PyBounds {
    let b = core::bound_checks(&phi.0);
    PyBounds {
        nuclear_lhs: b.nuclear_lhs,
        nuclear_rhs: b.nuclear_rhs,
        exchange_integral: b.exchange_integral,
        hartree_integral: b.hartree_integral,
        hartree_rhs: b.hartree_rhs,
        satisfied: b.satisfied(),
    }
}

/// OEP residual of the exchange operator of `phi` for the potential W and exchange part v_x.
#[pyfunction]
fn oep_residual(phi: &PyOrbitals, w: Vec<f64>, v_x: Vec<f64>) -> PyResult<PyOep> {
    let grid = phi.0.grid().clone();
    let w = core::LocalPotential::new(grid.clone(), w, Gauge::None).map_err(err)?;
    let v_x = core::LocalPotential::new(grid, v_x, Gauge::None).map_err(err)?;
    let k = core::exchange_matrix(&phi.0);
    let r = core::oep_residual(&phi.0, &w, &v_x, &k as &dyn NonlocalOperator).map_err(err)?;
    Ok(PyOep { values: r.values, integral: r.integral, l2_norm: r.l2_norm, rhs_norms: r.rhs_norms, iterations: r.iterations })
}

#[pyfunction]
fn eigen_shifts(phi: &PyOrbitals) -> PyResult<Vec<f64>> {
    core::eigen_shifts(&phi.0).map_err(err)
}

#[pyfunction]
fn reconstruct_potential(phi: &PyOrbitals, c: Vec<f64>) -> PyResult<PyPotential> {
    Ok(PyPotential(core::reconstruct_potential(&phi.0, &c).map_err(err)?))
}

#[pyfunction]
fn wronskian_residual(phi: &PyOrbitals, c: Vec<f64>) -> PyResult<Vec<f64>> {
    core::wronskian_residual(&phi.0, &c).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (
    z, n, method = "hf", *, grid_n = core::grid::DEFAULT_GRID_N, r_max = core::grid::DEFAULT_RMAX,
    mixing = None, tol = None, max_iter = None, eta_schedule = None, gauge = None
))]
#[allow(clippy::too_many_arguments)]
fn run_scf(
    py: Python<'_>,
    z: f64,
    n: usize,
    method: &str,
    grid_n: usize,
    r_max: f64,
    mixing: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    eta_schedule: Option<Vec<f64>>,
    gauge: Option<&str>,
) -> PyResult<PyScf> {
    let method: Method = parse(method)?;
    let mut cfg = core::ScfConfig::new(z, n, method);
    cfg.grid = core::GridSpec { n: grid_n, r_max, kind: GridKind::Log };
    if let Some(x) = mixing {
        cfg.mixing = x;
    }
    if let Some(x) = tol {
        cfg.tol_density = x;
    }
    if let Some(x) = max_iter {
        cfg.max_iter = x;
    }
    if let Some(x) = eta_schedule {
        cfg.eta_schedule = x;
    }
    if let Some(g) = gauge {
        cfg.gauge = Some(parse(g)?);
    }
    let r = py.detach(|| core::run_scf(&cfg)).map_err(err)?;
    Ok(PyScf {
        method: r.method.to_string(),
        converged: r.converged,
        iterations: r.iterations,
        tail_coefficient: r.exchange_potential.tail_coefficient(),
        exchange_potential: r.exchange_potential.values().to_vec(),
        orbitals: PyOrbitals(r.orbitals),
        eigenvalues: r.eigenvalues,
        gap: r.gap,
        energy: r.energy.into(),
        history: r.history,
        nuclear_potential: r.nuclear_potential,
        hartree_potential: r.hartree_potential,
        total_potential: r.total_potential,
        warnings: r.warnings,
    })
}

#[pymodule]
fn xcpot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyOrbitals>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PyExchange>()?;
    m.add_class::<PyKli>()?;
    m.add_class::<PyElp>()?;
    m.add_class::<PyEnergy>()?;
    m.add_class::<PyBounds>()?;
    m.add_class::<PyOep>()?;
    m.add_class::<PyScf>()?;
    m.add_function(wrap_pyfunction!(lowest_eigenpairs, m)?)?;
    m.add_function(wrap_pyfunction!(exchange_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(slater_potential, m)?)?;
    m.add_function(wrap_pyfunction!(kli_potential, m)?)?;
    m.add_function(wrap_pyfunction!(elp_potential, m)?)?;
    m.add_function(wrap_pyfunction!(objective_slater, m)?)?;
    m.add_function(wrap_pyfunction!(objective_kli, m)?)?;
    m.add_function(wrap_pyfunction!(objective_elp, m)?)?;
    m.add_function(wrap_pyfunction!(hf_energy, m)?)?;
    m.add_function(wrap_pyfunction!(bound_checks, m)?)?;
    m.add_function(wrap_pyfunction!(oep_residual, m)?)?;
    m.add_function(wrap_pyfunction!(eigen_shifts, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_potential, m)?)?;
    m.add_function(wrap_pyfunction!(wronskian_residual, m)?)?;
    m.add_function(wrap_pyfunction!(run_scf, m)?)?;
    Ok(())
}
