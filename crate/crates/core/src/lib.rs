//! Seed extraction from SRAM power-on state, a Fortuna-style generator and
//! accumulator, simulated entropy sources, SP 800-90B min-entropy
//! estimators and a subset of the SP 800-22 statistical tests.

pub mod accumulator;
pub mod calibration;
pub mod crc;
pub mod entropy;
pub mod error;
pub mod generator;
pub mod pipeline;
pub mod sources;
pub mod special;
pub mod stream;
pub mod sts;

pub use accumulator::{EntropyEvent, PoolSet, PoolSnapshot};
pub use crc::{extract_seed, Seed, SramImage};
pub use entropy::EntropyReport;
pub use error::{Error, Result};
pub use generator::GeneratorState;
pub use stream::{SampleStream, SourceKind, StreamMeta};
pub use sts::{BatchReport, TestResult};
