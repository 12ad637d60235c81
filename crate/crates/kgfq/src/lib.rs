//! File formats, run configuration and the `kgfq` command-line driver for
//! [`kgfq_core`].
//!
//! Every command reads plain files (TSV, JSONL, CSV, TOML) and writes JSON,
//! JSONL or Markdown artifacts stamped with the tool version, the hash of the
//! resolved configuration and the seed.

pub mod artifact;
pub mod cli;
pub mod commands;
pub mod config;
mod error;
pub mod io;

pub use error::{Error, Result};
