use serde_json::json;
use thiserror::Error;

/// Failures of a single command, each tied to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    /// The source and flux data violate `int_Omega f + int_{Omega^c} g = 0`.
    #[error(
        "compatibility condition int_Omega f + int_(Omega^c) g = 0 violated: defect {defect:?}"
    )]
    Incompatible { defect: f64 },

    #[error("{0}")]
    CheckFailed(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 1,
            CliError::Incompatible { .. } => 2,
            CliError::CheckFailed(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Incompatible { .. } => "incompatible",
            CliError::CheckFailed(_) => "check_failed",
            CliError::Io { .. } => "io",
        }
    }

    /// Single-line JSON for standard error.
    pub fn to_json_line(&self) -> String {
        let mut v = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Incompatible { defect } = self {
            v["defect"] = json!(defect);
        }
        v.to_string()
    }
}

impl From<nlneumann::Error> for CliError {
    fn from(e: nlneumann::Error) -> Self {
        match e {
            nlneumann::Error::Infeasible { defect } => CliError::Incompatible { defect },
            other => CliError::Validation(other.to_string()),
        }
    }
}
