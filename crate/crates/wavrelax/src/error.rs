//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is singular to working precision at pivot {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("implicit step operator is singular in block {block}")]
    SingularBlock { block: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid block sizes: {0}")]
    InvalidBlockSizes(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("iteration diverged (non-finite iterate) at sweep {iteration}")]
    Diverged { iteration: usize },

    #[error("interpolation nodes collide: window of {window} too short for {nodes} distinct nodes at step {h}")]
    NodeCollision { window: f64, nodes: usize, h: f64 },

    #[error("waveform has {found} grid points but {needed} are required")]
    TooFewGridPoints { needed: usize, found: usize },

    #[error("window {index} failed to converge after {iterations} iterations (residual {residual:.3e})")]
    WindowNotConverged {
        index: usize,
        iterations: usize,
        residual: f64,
        /// Window boundaries completed before the failure, ending at the
        /// failed window's right edge.
        partial_boundaries: Vec<f64>,
    },

    #[error("graph is disconnected; partition each component separately")]
    DisconnectedGraph,

    #[error("problem too large: {what} would need {needed}, limit is {limit}")]
    TooLarge {
        what: &'static str,
        needed: usize,
        limit: usize,
    },

    #[error("reachability cap of {cap} markings exceeded (frontier held {frontier} unexplored markings)")]
    ReachabilityCapExceeded { cap: usize, frontier: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}
