use std::fmt;

use tree_ising::model_file::ModelFileError;
use tree_ising::params::ParamError;
use tree_ising::pgf::PgfError;
use tree_ising::poisson::PoissonError;
use tree_ising::sampler::SamplerError;
use tree_ising::sum::SumError;
use tree_ising::ModelError;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Input = 1,
    Constraint = 2,
    Numerical = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Input,
            message: message.into(),
        }
    }

    pub fn constraint(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Constraint,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Numerical,
            message: message.into(),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Invalid(_) | ModelError::DomainError(_) => {
                CliError::constraint(e.to_string())
            }
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        match e {
            ParamError::Model(m) => m.into(),
            ParamError::NoConvergence(_) => CliError::numerical(e.to_string()),
            ParamError::NotAnIsingModel { .. } | ParamError::KappaOutOfRange { .. } => {
                CliError::constraint(e.to_string())
            }
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        match e {
            ModelFileError::Model(m) => m.into(),
            ModelFileError::Param(p) => p.into(),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<SumError> for CliError {
    fn from(e: SumError) -> Self {
        match e {
            SumError::Model(m) => m.into(),
            SumError::ToleranceExceeded(_) => CliError::numerical(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<PoissonError> for CliError {
    fn from(e: PoissonError) -> Self {
        match e {
            PoissonError::NotCommonQ { .. } | PoissonError::AlphaOutOfRange { .. } => {
                CliError::constraint(e.to_string())
            }
            PoissonError::TruncationTooSevere { .. } | PoissonError::Pmf(_) => {
                CliError::numerical(e.to_string())
            }
            PoissonError::Sum(s) => s.into(),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::NotSymmetricModel { .. } => CliError::constraint(e.to_string()),
            SamplerError::InvalidArgument(_) => CliError::input(e.to_string()),
        }
    }
}

impl From<PgfError> for CliError {
    fn from(e: PgfError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}
