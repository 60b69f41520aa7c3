//! Front end for `ibnr-core`: JSON configuration, command dispatch and report output.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, Command, Format, Overrides, RunConfig};
pub use error::{CliError, CliResult, ErrorKind};
pub use output::{Report, Row};
pub use run::run;
