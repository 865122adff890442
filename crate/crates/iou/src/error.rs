use std::path::Path;

/// Failure of a CLI command, carrying the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] iou_core::Error),
    #[error("oracle failure: {0}")]
    Oracle(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use iou_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Oracle(_) => 5,
            CliError::Core(e) => match e {
                E::InvalidParameter { .. } | E::RefusedEnumeration { .. } | E::MemoryCap { .. } => 2,
                E::Input(_) | E::Domain(_) => 3,
                E::DegenerateDesign(_) | E::DegenerateVariance { .. } => 4,
            },
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }

    pub(crate) fn output(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Config(format!("cannot write {}: {err}", path.display()))
    }
}
