//! Generators, file formats and experiment drivers behind the `qcl` binary.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod generators;

pub use error::{WbError, WbResult};
