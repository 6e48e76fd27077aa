//! File formats, image IO and the `qcf` command line.

pub mod cli;
pub mod error;
pub mod imageio;
pub mod io;

pub use error::{ExitCode, QcfError};
