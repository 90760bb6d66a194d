use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mixing parameters p={p}, q={q}: {reason}")]
    InvalidParams { p: f64, q: f64, reason: &'static str },

    #[error("no root of p^l + q^l = 1 in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("elastic parameters (p^2 + q^2 = 1): the drift coefficient 1/r vanishes")]
    ElasticSingularity,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed snapshot {path:?} at line {line}: {msg}")]
    MalformedSnapshot { path: PathBuf, line: usize, msg: String },

    #[error("malformed manifest {path:?} at line {line}: {msg}")]
    MalformedManifest { path: PathBuf, line: usize, msg: String },

    #[error("tail violation: |g(xi_max)| = {value:e} exceeds {tol:e}")]
    TailViolation { value: f64, tol: f64 },

    #[error("divergence at t={time}: max modulus {modulus}")]
    Divergence { time: f64, modulus: f64 },

    #[error("time {t} outside trajectory window [{start}, {end}]")]
    OutOfWindow { t: f64, start: f64, end: f64 },

    #[error("delta={delta} is not admissible: {reason}")]
    InadmissibleDelta { delta: f64, reason: &'static str },

    #[error("no convergence after {iterations} sweeps (last distance {last:e})")]
    NoConvergence { iterations: usize, last: f64 },

    #[error("insufficient tail: {usable} usable nodes beyond rho, need {needed}")]
    InsufficientTail { usable: usize, needed: usize },

    #[error("incompatible moments: normalization errors (mass {mass:e}, mean {mean:e}, var {var:e})")]
    IncompatibleMoments { mass: f64, mean: f64, var: f64 },

    #[error("states live on different grids")]
    GridMismatch,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("imaginary residue {residue:e} of the inverse transform exceeds tolerance")]
    Asymmetry { residue: f64 },

    #[error("negative mass {neg_mass:e} exceeds {limit:e}")]
    ExcessNegativity { neg_mass: f64, limit: f64 },

    #[error("excluded mass {mass:e} exceeds {limit:e}")]
    MassExclusionTooLarge { mass: f64, limit: f64 },

    #[error("moment hierarchy failed its second-moment consistency check (residual {0:e})")]
    HierarchyInconsistent(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TailViolation { .. }
                | Error::Divergence { .. }
                | Error::NoConvergence { .. }
                | Error::InadmissibleDelta { .. }
                | Error::ElasticSingularity
                | Error::NoRoot { .. }
                | Error::InsufficientTail { .. }
                | Error::IncompatibleMoments { .. }
                | Error::DegenerateFit(_)
                | Error::Asymmetry { .. }
                | Error::ExcessNegativity { .. }
                | Error::MassExclusionTooLarge { .. }
                | Error::HierarchyInconsistent(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::MalformedSnapshot { .. } | Error::MalformedManifest { .. }
        )
    }
}
