//! Experiment plumbing shared by the command-line tool and the examples:
//! configuration, seeded runs with on-disk artifacts, suites, and the
//! standalone search, evaluation and plotting tools.

pub mod config;
pub mod run;
pub mod tools;

pub use config::{Overrides, RunConfig};

pub use run::{mean_std, run_seed, run_suite, smooth, Manifest, SeedSummary, SuiteReport};
