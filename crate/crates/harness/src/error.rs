use std::path::PathBuf;

use spectral_impute::diffusion::DiffusionError;
use spectral_impute::gnn::GnnError;
use spectral_impute::graph::GraphError;
use spectral_impute::prune::PruneError;
use spectral_impute::tensor_io::TensorIoError;
use spectral_impute::LinalgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    /// Bad configuration or command-line input.
    #[error("config: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error(transparent)]
    Diffusion(#[from] DiffusionError),

    #[error(transparent)]
    Gnn(#[from] GnnError),

    #[error(transparent)]
    Prune(#[from] PruneError),

    #[error(transparent)]
    TensorIo(#[from] TensorIoError),

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Self::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code: 1 for usage problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
