use std::fmt;
use std::process::ExitCode;

use nctorus::Error;

/// Why a run stopped. Config problems exit with 2, numerical ones with 1.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    /// Any library error raised while reading input is a config error,
    /// including terms outside a strict truncation box.
    pub fn config(e: Error) -> Self {
        Failure::Config(e.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(2),
            Failure::Numerical(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DimensionMismatch { .. }
            | Error::ThetaMismatch
            | Error::PolicyMismatch
            | Error::InvalidTheta(_)
            | Error::AxisOutOfRange { .. }
            | Error::ShapeMismatch(_)
            | Error::WrongConvention { .. }
            | Error::InvalidParameter(_)
            | Error::BoxTooSmall { .. }
            | Error::Malformed(_)
            | Error::Json(_) => Failure::Config(e.to_string()),
            Error::SupportOverflow { .. }
            | Error::NoConvergence { .. }
            | Error::NotIdempotent(_)
            | Error::NotProjection { .. }
            | Error::InvalidPotential(_)
            | Error::OutsideModule(_)
            | Error::CrossCheck { .. } => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o: {e}"))
    }
}
