use std::fmt;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// A fatal error tagged with the stage that raised it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub stage: String,
    pub code: u8,
    pub message: String,
}

impl CliError {
    /// Bad input, configuration or missing upstream artifacts (exit 2).
    pub fn usage(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Self { stage: stage.into(), code: EXIT_USAGE, message: message.into() }
    }

    /// A stage ran but its result is unusable or a check failed (exit 1).
    pub fn failure(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Self { stage: stage.into(), code: EXIT_FAILURE, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}
