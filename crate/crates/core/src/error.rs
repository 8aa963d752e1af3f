//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("n_states must be at least 1")]
    EmptyStateSpace,

    #[error("n_symbols must be at least 1")]
    EmptyAlphabet,

    #[error("observation sequence is empty")]
    EmptySequence,

    #[error("no observation sequences given")]
    NoSequences,

    #[error("{context}: expected length {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("{context}[{index}] = {value} is outside [0, 1]")]
    ProbabilityOutOfRange {
        context: String,
        index: usize,
        value: f64,
    },

    #[error("{context} sums to {sum}; must equal 1 within {tolerance:e}")]
    SumNotOne {
        context: String,
        sum: f64,
        tolerance: f64,
    },

    #[error("variance[{index}] = {value} is below the floor {floor:e}")]
    VarianceBelowFloor {
        index: usize,
        value: f64,
        floor: f64,
    },

    #[error("{context}[{index}] is not a finite number")]
    NonFinite { context: String, index: usize },

    #[error("symbol {symbol} at position {position} is out of range for {n_symbols} symbols")]
    SymbolOutOfRange {
        position: usize,
        symbol: usize,
        n_symbols: usize,
    },

    #[error("observation kind {observed} does not match the model's {expected} emissions")]
    EmissionKindMismatch {
        expected: &'static str,
        observed: &'static str,
    },

    #[error("zero total probability at step {step}: the observation is impossible under the model")]
    ZeroProbability { step: usize },

    #[error("impossible observation: every state path has probability zero")]
    ImpossibleObservation,

    #[error("enumeration too large: {n_states}^{len} exceeds {limit} paths")]
    EnumerationTooLarge {
        n_states: usize,
        len: usize,
        limit: u64,
    },

    #[error("observation sequence has zero likelihood under the model")]
    ZeroLikelihood,

    #[error("initial-state statistics sum to zero; no update is possible")]
    DegenerateInitialStats,

    #[error("invalid configuration: {message}")]
    InvalidConfig { message: String },

    #[error("sequence {index}: {source}")]
    InSequence {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file contains no observation sequences")]
    EmptySequenceFile { path: String },

    #[error("unsupported schema_version {found}; this build supports {supported}")]
    UnsupportedSchemaVersion { found: u64, supported: u64 },
}
