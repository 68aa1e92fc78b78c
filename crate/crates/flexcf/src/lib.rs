//! File formats, the external-predictor adapter, report artifacts and the
//! end-to-end pipeline behind the `flexcf` command.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod external;
pub mod manifest;
pub mod pipeline;
pub mod schema_file;

pub use error::{Error, Result};
pub use flexcf_core as core;
