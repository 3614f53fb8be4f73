//! Configuration, file formats and command drivers around `microfrac-core`.

pub mod config;
pub mod error;
pub mod output;
pub mod scenario;
pub mod sweep;
pub mod table_io;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
