//! Configuration, pipeline stages and acceptance criteria behind the `sinai`
//! binary.

pub mod config;
pub mod criteria;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod suite;

pub use config::{Check, ExperimentConfig};
pub use criteria::Outcome;
pub use error::{CliError, Result};
pub use pipeline::{load_bundle, run, Report};
pub use suite::Suite;
