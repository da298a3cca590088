use std::fmt;

use koopman_core::{ErrorClass, KoopmanError};

#[derive(Debug)]
pub enum CliError {
    Core(KoopmanError),
    /// Bad config file, inconsistent options or missing required values.
    Config(String),
}

impl CliError {
    /// 2 parse/usage, 3 dimension, 4 numerical, 5 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.class() {
                ErrorClass::Parse => 2,
                ErrorClass::Dimension => 3,
                ErrorClass::Numerical => 4,
                ErrorClass::Io => 5,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<KoopmanError> for CliError {
    fn from(e: KoopmanError) -> Self {
        CliError::Core(e)
    }
}

pub fn missing(flag: &str) -> CliError {
    CliError::Config(format!("--{flag} is required (on the command line or in the config file)"))
}
