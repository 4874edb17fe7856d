//! Input files, reports, experiment drivers and plotting for the `hecpd`
//! command-line tool.

pub mod error;
pub mod experiments;
pub mod input;
pub mod plot;
pub mod report;

pub use error::{exit, CliError};
