use thiserror::Error;

/// Errors surfaced by the library. Every variant is a caller or input
/// problem except [`Error::CounterOverflow`], which is fatal for the
/// generator instance that raised it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed SRAM image: expected {expected} bytes, got {got}")]
    MalformedImage { expected: usize, got: usize },

    #[error("malformed seed: expected {expected} bytes, got {got}")]
    MalformedSeed { expected: usize, got: usize },

    #[error("reseed requires non-empty seed material")]
    EmptySeedMaterial,

    #[error("generator is unseeded")]
    Unseeded,

    #[error("generator counter overflow")]
    CounterOverflow,

    #[error("request of {requested} bytes outside 1..={max}")]
    RequestSize { requested: usize, max: usize },

    #[error("block count must be at least 1")]
    ZeroBlocks,

    #[error("event payload of {len} bytes outside 1..={max}")]
    PayloadSize { len: usize, max: usize },

    #[error("reseed requested but pool 0 holds {events} of {threshold} required events")]
    NotReady { events: u64, threshold: u64 },

    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("stream too short: {estimator} needs at least {needed} {unit}, got {got}")]
    StreamTooShort {
        estimator: &'static str,
        needed: usize,
        got: usize,
        unit: &'static str,
    },

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
