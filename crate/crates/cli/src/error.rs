//! Error type with the stable exit-code contract:
//! 0 success, 1 verification failure, 2 input parse error, 3 shape/config
//! error, 4 numerical failure.

use std::fmt;

use unialign_core::diagnostics::DiagnosticsError;
use unialign_core::divergence::DivergenceError;
use unialign_core::geometry::GeometryError;
use unialign_core::losses::LossError;
use unialign_core::trainer::TrainerError;

#[derive(Debug)]
pub enum CliError {
    /// Exit 1: a verification suite reported a failure.
    Verification(String),
    /// Exit 2: unreadable or malformed input (files, config syntax).
    Parse(String),
    /// Exit 3: inconsistent shapes or invalid configuration values.
    Shape(String),
    /// Exit 4: numerical failure during computation.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Shape(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Verification(m) => write!(f, "verification failure: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Shape(m) => write!(f, "shape/config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::ZeroVector { .. } => CliError::Parse(e.to_string()),
            GeometryError::DegenerateCentroid { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Shape(e.to_string()),
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::Geometry(g) => g.into(),
            _ => CliError::Shape(e.to_string()),
        }
    }
}

impl From<DivergenceError> for CliError {
    fn from(e: DivergenceError) -> Self {
        match e {
            DivergenceError::NumericalUnderflow { .. } | DivergenceError::GridTooCoarse { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Shape(e.to_string()),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::CalibrationFailure { .. }
            | DiagnosticsError::UndefinedCosine { .. } => CliError::Numerical(e.to_string()),
            DiagnosticsError::Loss(l) => l.into(),
            _ => CliError::Shape(e.to_string()),
        }
    }
}

impl From<TrainerError> for CliError {
    fn from(e: TrainerError) -> Self {
        match e {
            TrainerError::InvalidArgument { .. } => CliError::Shape(e.to_string()),
            TrainerError::Loss(l) => l.into(),
            TrainerError::Geometry(g) => g.into(),
            TrainerError::Diagnostics(d) => d.into(),
            TrainerError::Divergence(d) => d.into(),
            // step blow-ups and non-finite records carry the failing epoch
            // in their message
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
