use thiserror::Error;

#[derive(Debug, Error)]
pub enum XcError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid orbital set: {0}")]
    InvalidOrbitals(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate density: KLI kernel has dimension {0}, expected 1")]
    DegenerateDensity(usize),
    #[error("disconnected density: ELP kernel has dimension {0}, expected 1")]
    DisconnectedDensity(usize),
    #[error("gap assumption violated: eps_(N+1) - eps_N = {0:e}")]
    GapAssumption(f64),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, XcError>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(XcError::Shape { expected, got })
    }
}
