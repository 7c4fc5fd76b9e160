//! Library side of the `uavmec` command-line tool: parameter sweeps, output
//! files (JSON reports, CSV tables, SVG charts) and the verification suites.

pub mod experiment;
pub mod output;
pub mod svg;
pub mod verify;

/// `git describe` of the build, embedded in every output file.
pub const GIT_DESCRIBE: &str = env!("UAVMEC_GIT_DESCRIBE");

/// Version of the CSV layouts written by this crate.
pub const CSV_SCHEMA_VERSION: u32 = 1;
