//! File formats, dataset scanning and the command line around `cvrnet-core`.
//!
//! - [`pnm`]: 8-bit binary PGM/PPM decoding and encoding
//! - [`container`]: the chunked tensor layout of checkpoints and sidecars
//! - [`checkpoint`]: model save, load and name-matched partial import
//! - [`dataset`]: directory scanning, image loading and the disk sample source
//! - [`config`]: `key = value` run configuration
//! - [`artifacts`]: reports, fold plans, training logs and run manifests
//! - [`cli`]: the `cvrnet` subcommands

pub mod artifacts;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod container;
pub mod dataset;
pub mod error;
pub mod fs;
pub mod pnm;

pub use cvrnet_core as core;
pub use error::{Error, Result};
