//! Error types shared across the crate.

use thiserror::Error;

/// Errors from k-mer encoding and rolling.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KmerError {
    #[error("symbol {0:?} is not in the alphabet")]
    UnknownSymbol(char),
    #[error("expected length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("symbol code {code} out of range for alphabet of size {sigma}")]
    SymbolOutOfRange { code: u8, sigma: u16 },
}

/// Errors from static construction (graph or index).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    /// Two distinct inputs collided under the current fingerprint base;
    /// the caller redraws the base and re-streams.
    #[error("fingerprint collision among inputs; redraw the base and restart")]
    RestartNeeded,
    #[error("gave up after {0} restarts; parameters are unsuitable for this input")]
    TooManyRestarts(u32),
    #[error("sequence {index} has length {len}, shorter than k = {k}")]
    SequenceTooShort { index: usize, len: usize, k: usize },
    #[error("pattern length {k} exceeds text length {len}")]
    PatternLongerThanText { k: usize, len: usize },
    #[error("k = {0} is out of range (1..={1})")]
    KOutOfRange(usize, usize),
    #[error(transparent)]
    Kmer(#[from] KmerError),
}

/// Errors from graph queries and dynamic updates.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("node {0} is not in the graph")]
    NodeAbsent(String),
    #[error("edge {0} -> {1} is not in the graph")]
    EdgeAbsent(String, String),
    #[error("k-mers do not overlap by k-1 symbols")]
    NotChainable,
    #[error("distinct k-mer {0} collides with a stored fingerprint")]
    DistinctKmerCollision(String),
    #[error("operation requires a dynamic-mode graph")]
    NotDynamic,
    #[error(transparent)]
    Kmer(#[from] KmerError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// Errors from forest surgeries.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForestError {
    #[error("node at slot {0} is not a root")]
    NotARoot(u32),
    #[error("node at slot {0} is already a root")]
    AlreadyRoot(u32),
    #[error("attachment edge is not confirmed by the adjacency bits")]
    EdgeNotConfirmed,
    #[error("corrupt forest: {0}")]
    CorruptForest(String),
}

/// Errors from snapshot persistence.
#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("bad magic; not a snapshot file")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    VersionMismatch(u16),
    #[error("checksum mismatch; snapshot is corrupted")]
    ChecksumMismatch,
    #[error("snapshot is truncated")]
    Truncated,
    #[error("malformed snapshot: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
