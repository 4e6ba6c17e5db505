//! Command line and local HTTP service for the cageforge engine.

pub mod buffer;
pub mod cli;
pub mod document;
pub mod error;
pub mod ops;
pub mod pipeline;
pub mod service;

pub use error::{ErrorKind, ShellError};
