use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] plap_core::Error),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Machine-readable failure record written as `failure.json`.
#[derive(Debug, Serialize)]
pub struct Failure {
    pub status: &'static str,
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    /// 2 config, 3 nonconvergence, 4 verification, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use plap_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::InvalidInput(_) | E::InvalidDomain(_) | E::WrongRegime(_)) => 2,
            CliError::Core(E::NonConvergence { .. } | E::Divergence { .. }) => 3,
            CliError::Core(E::IterateEscape(_) | E::InvalidCandidate(_)) => 4,
            CliError::Verification(_) => 4,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        use plap_core::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Core(E::NonConvergence { .. }) => "nonconvergence",
            CliError::Core(E::Divergence { .. }) => "divergence",
            CliError::Core(E::IterateEscape(_)) => "iterate_escape",
            CliError::Core(E::InvalidCandidate(_)) => "invalid_candidate",
            CliError::Core(E::InvalidInput(_) | E::InvalidDomain(_) | E::WrongRegime(_)) => "invalid_input",
            CliError::Core(_) => "core",
            CliError::Verification(_) => "verification",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
        }
    }

    pub fn failure(&self) -> Failure {
        Failure {
            status: "error",
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        }
    }
}
