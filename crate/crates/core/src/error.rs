use alloc::string::String;
use core::fmt;

use nalgebra::DVector;

/// Errors shared by all solver and planner operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong length for the owning system.
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A potential evaluation produced a non-finite or inconsistent output.
    Evaluation(String),
    /// Newton iteration did not reach the residual tolerance.
    NonConvergence {
        residual: f64,
        last_iterate: DVector<f64>,
    },
    /// The state Hessian is singular (critical point) where invertibility is required.
    SingularJacobian,
    /// The requested control coincides with the critical control of the system.
    CriticalControl,
    /// Boundary angles coincide, so the boundary-value system is singular.
    DegenerateBoundary,
    /// A path needs at least two points.
    InvalidPath,
    /// Grid bounds are empty or reversed.
    InvalidBounds(String),
    /// No path exists between the requested graph nodes.
    NoPath { reachable: usize },
    /// A system parameter violates its construction invariant.
    InvalidParameter(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch for {what}: expected {expected}, got {got}"),
            Error::Evaluation(msg) => write!(f, "evaluation error: {msg}"),
            Error::NonConvergence { residual, .. } => {
                write!(f, "solver did not converge (last residual {residual:e})")
            }
            Error::SingularJacobian => write!(f, "singular state Hessian"),
            Error::CriticalControl => write!(f, "control coincides with the critical control"),
            Error::DegenerateBoundary => write!(f, "degenerate boundary data (alpha1 == alpha2)"),
            Error::InvalidPath => write!(f, "a path needs at least two points"),
            Error::InvalidBounds(msg) => write!(f, "invalid grid bounds: {msg}"),
            Error::NoPath { reachable } => {
                write!(f, "goal unreachable ({reachable} nodes reachable from start)")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
