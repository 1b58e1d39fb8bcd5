//! Exit-code discipline: 1 for malformed input, 2 for estimation failures,
//! 3 for solver non-convergence (artifacts are still written).

use famar_core::FamarError;

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ESTIMATION: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn estimation(message: impl Into<String>) -> Self {
        Self { code: EXIT_ESTIMATION, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(format!("io error: {}", e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::input(format!("json error: {}", e))
    }
}

impl From<FamarError> for CliError {
    fn from(e: FamarError) -> Self {
        match &e {
            FamarError::DimensionMismatch(_)
            | FamarError::EmptyPanel
            | FamarError::NonFinite(_)
            | FamarError::InvalidConfig(_)
            | FamarError::FactorDimension { .. } => CliError::input(e.to_string()),
            _ => CliError::estimation(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
