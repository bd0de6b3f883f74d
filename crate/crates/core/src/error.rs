use std::fmt;

use ndarray::Array1;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage a failure originated from, attached by the detection driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Embedding,
    Affinity,
    Partition,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Embedding => "embedding",
            Stage::Affinity => "affinity",
            Stage::Partition => "partition",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// Coordinate descent hit its iteration cap. Carries the last iterate.
    #[error("lasso did not converge in {iterations} sweeps (stationarity residual {residual:.3e})")]
    LassoNotConverged {
        iterations: usize,
        residual: f64,
        best: Array1<f64>,
    },

    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("no label for {} vertices: {}", .0.len(), .0.join(", "))]
    MissingLabels(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }

    pub fn at_row(self, row: usize) -> Self {
        Error::Row {
            row,
            source: Box::new(self),
        }
    }

    pub fn at_stage(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with row and stage annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Row { source, .. } | Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::NumericFailure(_) | Error::LassoNotConverged { .. }
        )
    }
}
