use subtyper_core::Error as CoreError;

/// Failures sorted by exit status: bad input or configuration exits 2,
/// everything else 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn is_usage(e: &CoreError) -> bool {
    match e {
        CoreError::Param(_)
        | CoreError::Spec(_)
        | CoreError::Split(_)
        | CoreError::Label(_)
        | CoreError::Parse { .. }
        | CoreError::Data(_) => true,
        CoreError::Fold { source, .. } => is_usage(source),
        _ => false,
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if is_usage(&e) {
            CliError::Usage(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
