//! Command-line front end: `select`, `simulate` and `diagnose`.
//!
//! Exit codes: 0 success, 2 bad input or usage (parse failures, unknown
//! scenario or method, enumeration budget, I/O), 3 degenerate data.

pub mod commands;
pub mod input;
pub mod report;

use std::fmt;

use rai_core::RaiError;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn degenerate(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DEGENERATE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<RaiError> for CliError {
    fn from(e: RaiError) -> Self {
        match e {
            RaiError::ConstantResponse
            | RaiError::AllColumnsConstant
            | RaiError::TooFewObservations(_)
            | RaiError::DegenerateTerms(_) => CliError::degenerate(e.to_string()),
            RaiError::BudgetExceeded { .. } => CliError::usage(format!(
                "{e}; reduce --k or the number of feature columns, or raise RAI_ENUM_BUDGET"
            )),
            other => CliError::usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}
