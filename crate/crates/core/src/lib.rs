//! Penalized single-index models and smoothing-path tests for the sign of a
//! Jensen Effect.

pub mod basis;
pub mod cli;
pub mod error;
pub mod fmt;
pub mod inference;
pub mod jensen;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod simlab;

pub use error::{Error, Result};
