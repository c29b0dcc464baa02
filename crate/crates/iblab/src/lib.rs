//! Experiment harness over `iblab-core`: artifact IO, experiment drivers,
//! the invariant suites and the `iblab` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod verify;
