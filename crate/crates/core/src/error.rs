use thiserror::Error;

/// Errors produced by the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("table does not cover the grid: {0}")]
    Coverage(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("inconsistent molecular data: {0}")]
    DataConsistency(String),

    #[error("unphysical configuration: {0}")]
    Physics(String),

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("poor fit: {0}")]
    FitQuality(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("step size collapsed at t = {t_fs:.6} fs (h = {step:.3e} a.u.): {detail}")]
    Stiffness { t_fs: f64, step: f64, detail: String },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by a numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Stiffness { .. }
                | Error::Integrity(_)
                | Error::Convergence(_)
                | Error::Evaluation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
