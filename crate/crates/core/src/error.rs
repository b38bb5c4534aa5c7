use std::path::PathBuf;

use thiserror::Error;

use crate::gridworld::MapSpec;

#[derive(Debug, Error)]
#[error("map generation failed for seed {seed} ({spec:?}): {reason}")]
pub struct GenerationError {
    pub seed: u64,
    pub spec: MapSpec,
    pub reason: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum MapParseError {
    #[error("missing header line")]
    MissingHeader,
    #[error("bad header {0:?}, expected \"width height\"")]
    BadHeader(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RowWidth { row: usize, expected: usize, found: usize },
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("unexpected character {found:?} at row {row}, column {col}")]
    BadChar { row: usize, col: usize, found: char },
    #[error("invalid map: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no replicates to aggregate")]
    Empty,
    #[error("replicate {index} has {found} episodes, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("breakage needs an attack onset at or after the plateau window (onset {onset}, window {window})")]
    NoOnset { onset: usize, window: usize },
    #[error("malformed curve: {0}")]
    Curve(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("could not parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cell {cell}: {source}")]
    MapGeneration {
        cell: String,
        #[source]
        source: GenerationError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("missing cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
