//! Hybrid GNSS + 5G attitude determination.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod fiveg;
pub mod frames;
pub mod gnss;
pub mod linalg;
pub mod simulation;
pub mod validate;

pub use error::{Error, Result};
