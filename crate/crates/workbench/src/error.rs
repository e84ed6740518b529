use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum WorkbenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no baseline for {experiment} (config hash {hash}); run `opcalc baseline <config>` first")]
    MissingBaseline { experiment: String, hash: String },
    #[error("baseline for config hash {0} already exists; pass --force to overwrite")]
    BaselineExists(String),
    #[error("experiment {0} records no baseline constants")]
    NoBaselineConstants(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("malformed baseline file at line {line}: {message}")]
    BaselineFormat { line: usize, message: String },
    #[error("malformed snapshot at line {line}: {message}")]
    Snapshot { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] opcalc_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;
