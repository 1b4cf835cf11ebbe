use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;

use crate::energetics::{bound_checks, BoundReport, EnergyBreakdown};
use crate::error::{Result, XcError};
use crate::oep::{eigen_shifts, oep_residual, wronskian_residual};
use crate::potentials::{Gauge, LocalPotential};
use crate::scf::{run_scf, GridSpec, Method, ScfConfig, ScfReport, StageReport};

pub const GRID_ENV: &str = "XCPOT_GRID_N";

#[derive(Debug, Parser)]
#[command(name = "xcpot", version, about = "Radial Hartree-Fock and local exchange potentials for spin-polarized atoms")]
struct Args {
    /// Nuclear charge
    #[arg(long = "Z")]
    z: Option<f64>,
    /// Number of electrons (all same spin)
    #[arg(long = "N")]
    n: Option<usize>,
    /// hf | slater | kli | elp
    #[arg(long)]
    method: Option<String>,
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    #[arg(long)]
    rmax: Option<f64>,
    /// Mixing parameter θ in (0, 1]
    #[arg(long)]
    mix: Option<f64>,
    /// L¹ density tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Comma-separated, strictly decreasing, ending at 0
    #[arg(long = "eta-schedule")]
    eta_schedule: Option<String>,
    /// homo | trace | raw
    #[arg(long)]
    gauge: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also compute the OEP residual and Wronskian diagnostics
    #[arg(long)]
    diagnostics: bool,
    /// key=value file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub scf: ScfConfig,
    pub out: PathBuf,
    pub verbosity: u8,
    pub seed: u64,
    pub diagnostics: bool,
}

fn usage(msg: impl Into<String>) -> XcError {
    XcError::Usage(msg.into())
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| usage(format!("invalid value '{v}' for {key}")))
}

fn parse_etas(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| parse_value("eta-schedule", x)).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(usage(format!("invalid value '{v}' for {key}"))),
    }
}

/// Flat key=value pairs, `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| usage(format!("config line {}: expected key=value", no + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

const CONFIG_KEYS: [&str; 13] =
    ["Z", "N", "method", "grid-n", "rmax", "mix", "tol", "max-iter", "eta-schedule", "gauge", "out", "diagnostics", "seed"];

/// Defaults, then the grid-size environment override, then the config file, then flags.
pub fn parse_args<I, T>(argv: I) -> Result<RunSpec>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| usage(e.to_string()))?;
    let env_grid = std::env::var(GRID_ENV).ok();
    build_spec(args, env_grid.as_deref())
}

fn build_spec(args: Args, env_grid: Option<&str>) -> Result<RunSpec> {
    let file = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => BTreeMap::new(),
    };
    if let Some(k) = file.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(usage(format!("unknown config key '{k}'")));
    }
    let get = |k: &str| file.get(k).map(String::as_str);

    let z = match (args.z, get("Z")) {
        (Some(z), _) => z,
        (None, Some(v)) => parse_value("Z", v)?,
        (None, None) => return Err(usage("--Z is required")),
    };
    let n = match (args.n, get("N")) {
        (Some(n), _) => n,
        (None, Some(v)) => parse_value("N", v)?,
        (None, None) => return Err(usage("--N is required")),
    };
    let method: Method = match args.method.as_deref().or(get("method")) {
        Some(m) => m.parse()?,
        None => Method::Hf,
    };
    let mut cfg = ScfConfig::new(z, n, method);
    let mut grid = GridSpec::default();
    if let Some(v) = env_grid {
        grid.n = parse_value(GRID_ENV, v)?;
    }
    if let Some(v) = get("grid-n") {
        grid.n = parse_value("grid-n", v)?;
    }
    if let Some(v) = args.grid_n {
        grid.n = v;
    }
    if let Some(v) = get("rmax") {
        grid.r_max = parse_value("rmax", v)?;
    }
    if let Some(v) = args.rmax {
        grid.r_max = v;
    }
    cfg.grid = grid;
    macro_rules! layer {
        ($field:expr, $key:literal, $flag:expr) => {
            if let Some(v) = get($key) {
                $field = parse_value($key, v)?;
            }
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    layer!(cfg.mixing, "mix", args.mix);
    layer!(cfg.tol_density, "tol", args.tol);
    layer!(cfg.max_iter, "max-iter", args.max_iter);
    if let Some(s) = args.eta_schedule.as_deref().or(get("eta-schedule")) {
        cfg.eta_schedule = parse_etas(s)?;
    }
    if let Some(g) = args.gauge.as_deref().or(get("gauge")) {
        cfg.gauge = Some(g.parse::<Gauge>().map_err(|e| usage(e.to_string()))?);
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let mut out = PathBuf::from("xcpot-out");
    layer!(out, "out", args.out.clone());
    let mut seed = 0u64;
    layer!(seed, "seed", args.seed);
    let diagnostics = args.diagnostics || get("diagnostics").map(|v| parse_bool("diagnostics", v)).transpose()?.unwrap_or(false);
    Ok(RunSpec { scf: cfg, out, verbosity: args.verbose, seed, diagnostics })
}

#[derive(Serialize)]
struct Summary<'a> {
    method: Method,
    z: f64,
    n_electrons: usize,
    grid: GridSpec,
    gauge: Gauge,
    mixing: f64,
    tol_density: f64,
    eta_schedule: &'a [f64],
    seed: u64,
    converged: bool,
    iterations: usize,
    stages: &'a [StageReport],
    energy: EnergyBreakdown,
    eigenvalues: &'a [f64],
    gap: f64,
    tail_coefficient: Option<f64>,
    history: &'a [f64],
    warnings: &'a [String],
}

#[derive(Serialize)]
struct OepSummary {
    l2_norm: f64,
    integral: f64,
    solves: usize,
    rhs_norms: Vec<f64>,
    iterations: Vec<usize>,
}

#[derive(Serialize)]
struct BoundsSummary {
    #[serde(flatten)]
    report: BoundReport,
    nuclear_margin: f64,
    exchange_margin: f64,
    hartree_margin: f64,
    satisfied: bool,
}

#[derive(Serialize)]
struct Diagnostics {
    oep_residual: Option<OepSummary>,
    oep_error: Option<String>,
    wronskian: Option<Vec<f64>>,
    bounds: BoundsSummary,
}

fn fmt_f(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}

fn check_invariants(rep: &ScfReport, tol: f64) -> Result<()> {
    let fail = |m: String| Err(XcError::Numerical(format!("output invariant violated: {m}")));
    let e = &rep.energy;
    let parts = [e.kinetic, e.nuclear, e.hartree, e.exchange, e.total];
    if parts.iter().any(|x| !x.is_finite()) {
        return fail("non-finite energy".into());
    }
    if (e.total - (e.kinetic + e.nuclear + e.hartree + e.exchange)).abs() > 1e-12 * (1.0 + e.total.abs()) {
        return fail("energy terms do not add up".into());
    }
    if e.hartree < 0.0 || e.exchange > 0.0 || e.hartree + e.exchange < -1e-10 {
        return fail(format!("Coulomb terms J = {}, X = {}", e.hartree, e.exchange));
    }
    if rep.eigenvalues.windows(2).any(|p| p[1] < p[0]) || rep.gap < 0.0 {
        return fail("eigenvalues not ascending".into());
    }
    if rep.orbitals.orthonormality_error() > 1e-8 {
        return fail("orbitals not orthonormal".into());
    }
    if rep.converged && rep.history.last().is_some_and(|h| *h > tol) {
        return fail("converged run with residual above tolerance".into());
    }
    Ok(())
}

fn write_potential_csv(path: &Path, rep: &ScfReport) -> Result<()> {
    let grid = rep.orbitals.grid();
    let mut s = String::from("r,v_nuc,v_H,v_x,r_v_x\n");
    let vx = rep.exchange_potential.values();
    for (q, &r) in grid.points().iter().enumerate() {
        let row = [r, rep.nuclear_potential[q], rep.hartree_potential[q], vx[q], r * vx[q]];
        let cells: Vec<String> = row.iter().map(|x| fmt_f(*x)).collect();
        writeln!(s, "{}", cells.join(",")).unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn write_orbitals_csv(path: &Path, rep: &ScfReport) -> Result<()> {
    let phi = &rep.orbitals;
    let mut s = String::from("r");
    for i in 1..=phi.len() {
        write!(s, ",u_{i}").unwrap();
    }
    s.push('\n');
    for (q, &r) in phi.grid().points().iter().enumerate() {
        s.push_str(&fmt_f(r));
        for u in phi.orbitals() {
            s.push(',');
            s.push_str(&fmt_f(u[q]));
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn diagnostics(spec: &RunSpec, rep: &ScfReport) -> Result<Diagnostics> {
    let b = bound_checks(&rep.orbitals);
    let bounds = BoundsSummary {
        nuclear_margin: b.nuclear_margin(),
        exchange_margin: b.exchange_margin(),
        hartree_margin: b.hartree_margin(),
        satisfied: b.satisfied(),
        report: b,
    };
    let mut out = Diagnostics { oep_residual: None, oep_error: None, wronskian: None, bounds };
    if !spec.diagnostics {
        return Ok(out);
    }
    out.wronskian = Some(wronskian_residual(&rep.orbitals, &eigen_shifts(&rep.orbitals)?)?);
    if rep.method != Method::Hf {
        let grid = rep.orbitals.grid().clone();
        let w = LocalPotential::new(grid.clone(), rep.total_potential.clone(), Gauge::None)?;
        // the exchange part of the self-consistent potential
        let v: Vec<f64> = (0..grid.len())
            .map(|q| rep.total_potential[q] - rep.nuclear_potential[q] - rep.hartree_potential[q])
            .collect();
        let v_x = LocalPotential::new(grid, v, rep.gauge)?;
        match oep_residual(&rep.orbitals, &w, &v_x, &rep.exchange) {
            Ok(r) => {
                out.oep_residual = Some(OepSummary {
                    l2_norm: r.l2_norm,
                    integral: r.integral,
                    solves: r.solves,
                    rhs_norms: r.rhs_norms,
                    iterations: r.iterations,
                })
            }
            Err(e) => out.oep_error = Some(e.to_string()),
        }
    }
    Ok(out)
}

/// Run the SCF and diagnostics, write outputs. Exit code 0 converged, 2 not converged, 1 error.
pub fn run(spec: &RunSpec) -> i32 {
    match run_inner(spec) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run_inner(spec: &RunSpec) -> Result<bool> {
    let cfg = &spec.scf;
    let rep = run_scf(cfg)?;
    check_invariants(&rep, cfg.tol_density)?;
    for w in &rep.warnings {
        log::warn!("{w}");
    }
    std::fs::create_dir_all(&spec.out)?;
    let summary = Summary {
        method: cfg.method,
        z: cfg.z,
        n_electrons: cfg.n_electrons,
        grid: cfg.grid,
        gauge: rep.gauge,
        mixing: cfg.mixing,
        tol_density: cfg.tol_density,
        eta_schedule: &cfg.eta_schedule,
        seed: spec.seed,
        converged: rep.converged,
        iterations: rep.iterations,
        stages: &rep.stages,
        energy: rep.energy,
        eigenvalues: &rep.eigenvalues,
        gap: rep.gap,
        tail_coefficient: rep.exchange_potential.tail_coefficient(),
        history: &rep.history,
        warnings: &rep.warnings,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| XcError::Numerical(e.to_string()))?;
    std::fs::write(spec.out.join("summary.json"), json + "\n")?;
    write_potential_csv(&spec.out.join("potential.csv"), &rep)?;
    write_orbitals_csv(&spec.out.join("orbitals.csv"), &rep)?;
    let diag = diagnostics(spec, &rep)?;
    let json = serde_json::to_string_pretty(&diag).map_err(|e| XcError::Numerical(e.to_string()))?;
    std::fs::write(spec.out.join("diagnostics.json"), json + "\n")?;
    if spec.verbosity > 0 {
        eprintln!(
            "{} Z={} N={}: E = {} hartree, converged = {}, {} iterations",
            cfg.method,
            cfg.z,
            cfg.n_electrons,
            fmt_f(rep.energy.total),
            rep.converged,
            rep.iterations
        );
    }
    Ok(rep.converged)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_entry<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match args.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_env("XCPOT_LOG").try_init();
    let env_grid = std::env::var(GRID_ENV).ok();
    match build_spec(args, env_grid.as_deref()) {
        Ok(spec) => run(&spec),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(args: &[&str], env: Option<&str>) -> Result<RunSpec> {
        let a = Args::try_parse_from(std::iter::once("xcpot").chain(args.iter().copied())).map_err(|e| usage(e.to_string()))?;
        build_spec(a, env)
    }

    #[test]
    fn defaults_filled() {
        let s = spec(&["--Z", "2", "--N", "2", "--method", "slater"], None).unwrap();
        assert_eq!(s.scf.method, Method::Slater);
        assert_eq!(s.scf.mixing, 0.3);
        assert_eq!(s.scf.eta_schedule, vec![0.1, 0.01, 0.001, 0.0]);
        assert_eq!(s.seed, 0);
        assert_eq!(s.scf.grid, GridSpec::default());
    }

    #[test]
    fn env_then_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "# comment\nZ = 3\nN=2\ngrid-n=900 # inline\nmix=0.5\n").unwrap();
        let cfg = p.to_str().unwrap();
        let s = spec(&["--config", cfg], Some("700")).unwrap();
        assert_eq!((s.scf.z, s.scf.n_electrons, s.scf.grid.n, s.scf.mixing), (3.0, 2, 900, 0.5));
        let s = spec(&["--config", cfg, "--grid-n", "800", "--mix", "0.2"], Some("700")).unwrap();
        assert_eq!((s.scf.grid.n, s.scf.mixing), (800, 0.2));
        let s = spec(&["--Z", "1", "--N", "1"], Some("700")).unwrap();
        assert_eq!(s.scf.grid.n, 700);
    }

    #[test]
    fn usage_errors() {
        assert!(matches!(spec(&["--N", "3", "--Z", "2"], None), Err(XcError::Usage(_))));
        let e = spec(&["--Z", "2", "--N", "2", "--method", "xalpha"], None).unwrap_err();
        assert!(e.to_string().contains("slater, kli, elp"), "{e}");
        assert!(spec(&["--Z", "2", "--N", "2", "--bogus"], None).is_err());
        assert!(spec(&["--Z", "2", "--N", "2", "--eta-schedule", "0.1,0.2,0"], None).is_err());
        assert!(spec(&["--Z", "2", "--N", "2", "--method", "kli", "--gauge", "trace"], None).is_err());
    }
}
