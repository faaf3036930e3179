use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),
    #[error("unknown label {0}")]
    UnknownLabel(u32),
    #[error("edge {0}-{1} already exists")]
    EdgeExists(u32, u32),
    #[error("no edge between {0} and {1}")]
    EdgeMissing(u32, u32),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("cut plane does not split label {0}")]
    EmptyCut(u32),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("table: {0}")]
    Table(String),
}
