//! Fully dynamic de Bruijn graphs over hashed k-mers.
//!
//! Nodes are the distinct k-mers of the input; they are identified through
//! Karp-Rabin fingerprints mapped to dense slots, adjacency lives in two
//! per-slot bit rows, and exact membership is verified by ascending a
//! covering forest of shallow trees to a sampled root. The same machinery,
//! keyed on character histograms instead of k-mers, answers fixed-length
//! jumbled pattern matching queries.

pub mod adjacency;
pub mod alphabet;
pub mod error;
pub mod fingerprint;
pub mod forest;
pub mod graph;
pub mod jumbled;
pub mod kmer;
pub mod mphf;
pub mod node_index;
pub mod ops;
pub mod oracle;
pub mod rng;
pub mod snapshot;

pub use alphabet::Alphabet;
pub use error::{BuildError, ForestError, GraphError, KmerError, SnapshotError};
pub use fingerprint::{Fingerprint, KrParams};
pub use graph::{
    AddNodeOutcome, BuildConfig, DeBruijnGraph, GraphMode, InvariantReport, RepairStats,
};
pub use jumbled::JumbledIndex;
pub use kmer::{Histogram, Kmer, RollDirection};
pub use ops::Op;
pub use oracle::{fuzz_run, naive_jumbled_match, FuzzConfig, FuzzVerdict, NaiveGraph};
