//! Computational space of correlations.

extern crate openblas_src;

pub mod entropy;
pub mod error;
pub mod exec;
pub mod hierarchy;
pub mod inequality;
pub mod polytope;
pub mod protocol;
pub mod quantum;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
