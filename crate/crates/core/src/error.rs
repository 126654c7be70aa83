use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bank `{bank_id}` has zero total assets; weights are undefined")]
    ZeroTotalAssets { bank_id: String },

    #[error("asset {asset} has zero total market value (held by no bank)")]
    AssetNotHeld { asset: usize },

    #[error("asset index {asset} is out of range (network has {count} assets)")]
    UnknownAsset { asset: usize, count: usize },

    #[error("bank `{bank_id}` is not part of the network")]
    UnknownBank { bank_id: String },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("schema error{}: {message}", fmt_line(*.line))]
    Schema { line: Option<u64>, message: String },

    #[error("bank `{bank_id}` is missing asset {asset}, whose average weight is undefined")]
    UndefinedAverageWeight { bank_id: String, asset: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_line(line: Option<u64>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn schema(line: Option<u64>, message: impl Into<String>) -> Self {
        Error::Schema {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed input rather than runtime failure.
    pub fn is_schema(&self) -> bool {
        matches!(self, Error::Schema { .. })
    }
}
