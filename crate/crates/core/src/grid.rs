use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, XcError};

/// Innermost point of the log grid.
pub const LOG_GRID_R1: f64 = 1e-5;
pub const DEFAULT_GRID_N: usize = 4000;
pub const DEFAULT_RMAX: f64 = 50.0;
pub const MIN_GRID_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Uniform,
    Log,
}

impl std::str::FromStr for GridKind {
    type Err = XcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GridKind::Uniform),
            "log" => Ok(GridKind::Log),
            _ => Err(XcError::Parameter(format!("unknown grid kind '{s}' (uniform|log)"))),
        }
    }
}

/// Radial grid on (0, r_max] with quadrature weights for integrals in dr.
///
/// The outermost point carries the Dirichlet condition u(r_max) = 0, and a ghost
/// node at r = 0 (also u = 0) closes the inner end. `edge[k]` is the length of the
/// interval ending at node k, measured in the natural coordinate of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    kind: GridKind,
    r_max: f64,
    r: Vec<f64>,
    w: Vec<f64>,
    edge: Vec<f64>,
    step: Vec<f64>,
}

impl RadialGrid {
    pub fn build(n: usize, r_max: f64, kind: GridKind) -> Result<Self> {
        if n < MIN_GRID_N {
            return Err(XcError::Parameter(format!("grid needs n >= {MIN_GRID_N}, got {n}")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(XcError::Parameter(format!("r_max must be positive, got {r_max}")));
        }
        match kind {
            GridKind::Uniform => {
                let h = r_max / n as f64;
                let r: Vec<f64> = (1..=n).map(|k| k as f64 * h).collect();
                let mut w = vec![h; n];
                w[n - 1] = 0.5 * h;
                Ok(RadialGrid { kind, r_max, r, w, edge: vec![h; n], step: vec![h; n] })
            }
            GridKind::Log => {
                let r1 = LOG_GRID_R1;
                if r_max <= r1 * 10.0 {
                    return Err(XcError::Parameter(format!("r_max {r_max} too small for a log grid")));
                }
                let d = (r_max / r1).ln() / (n - 1) as f64;
                let mut r: Vec<f64> = (0..n).map(|k| r1 * (d * k as f64).exp()).collect();
                r[n - 1] = r_max;
                let step: Vec<f64> = r.iter().map(|x| d * x).collect();
                let mut w = step.clone();
                // the inner tail [0, r1] is integrated exactly for functions flat at the origin
                w[0] = r1 * (1.0 + 0.5 * d);
                w[n - 1] *= 0.5;
                let mut edge = Vec::with_capacity(n);
                edge.push(r1);
                for k in 1..n {
                    edge.push(d * (r[k - 1] * r[k]).sqrt());
                }
                Ok(RadialGrid { kind, r_max, r, w, edge, step })
            }
        }
    }

    pub fn default_log() -> Self {
        Self::build(DEFAULT_GRID_N, DEFAULT_RMAX, GridKind::Log).expect("default grid parameters are valid")
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn points(&self) -> &[f64] {
        &self.r
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn edges(&self) -> &[f64] {
        &self.edge
    }

    /// Local node spacing in the natural coordinate, dr/dt * dt.
    pub fn steps(&self) -> &[f64] {
        &self.step
    }

    /// Number of interior unknowns (all nodes but the pinned outer one).
    pub fn interior(&self) -> usize {
        self.r.len() - 1
    }

    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        check_len(self.len(), f.len())?;
        Ok(self.w.iter().zip(f).map(|(w, f)| w * f).sum())
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.w.iter().zip(f).zip(g).map(|((w, f), g)| w * f * g).sum()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.r.iter().map(|&r| f(r)).collect()
    }

    /// Kinetic energy ½∫(u')² with u = 0 at the ghost node.
    pub fn kinetic(&self, u: &[f64]) -> f64 {
        let mut prev = 0.0;
        let mut t = 0.0;
        for (x, e) in u.iter().zip(&self.edge) {
            let d = x - prev;
            t += d * d / e;
            prev = *x;
        }
        0.5 * t
    }

    /// Discrete second derivative from the same stencil used by the Hamiltonian,
    /// on interior nodes; the pinned outer node gets 0.
    pub fn second_derivative(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for k in 0..n - 1 {
            let left = if k == 0 { 0.0 } else { u[k - 1] };
            let flux_in = (u[k] - left) / self.edge[k];
            let flux_out = (u[k + 1] - u[k]) / self.edge[k + 1];
            out[k] = (flux_out - flux_in) / self.w[k];
        }
        out
    }
}

/// Grid samples of a function, checked for length and finiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: &RadialGrid, values: Vec<f64>) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(XcError::Parameter(format!("non-finite value at grid index {k}")));
        }
        Ok(RadialFunction { values })
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        RadialFunction { values: vec![0.0; grid.len()] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl std::ops::Deref for RadialFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}
