use serde::Serialize;

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Io,
    Config,
    NonConvergence,
    Precondition,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Io => 1,
            Self::Config => 2,
            Self::NonConvergence => 3,
            Self::Precondition => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    /// JSON pointer into the configuration, when the error is tied to a field.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
}

impl CliError {
    pub fn config(message: impl Into<String>, pointer: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Config, message: message.into(), pointer: Some(pointer.into()) }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Precondition, message: message.into(), pointer: None }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Io, message: message.into(), pointer: None }
    }

    pub fn at(mut self, pointer: impl Into<String>) -> Self {
        self.pointer = Some(pointer.into());
        self
    }

    /// The machine-readable record written to stderr.
    pub fn record(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<ibnr_core::Error> for CliError {
    fn from(e: ibnr_core::Error) -> Self {
        use ibnr_core::Error as E;
        let kind = match &e {
            E::Convergence(_) | E::NonFinite { .. } | E::Singular(_) | E::EvaluationDomain { .. } => ErrorKind::NonConvergence,
            E::Precondition(_) | E::UnsupportedService { .. } | E::Coverage { .. } => ErrorKind::Precondition,
            _ => ErrorKind::Config,
        };
        Self { kind, message: e.to_string(), pointer: None }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
