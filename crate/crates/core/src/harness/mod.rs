//! Batch driver: scenario files, check matrices and reports.
//!
//! Exit codes for front ends: [`EXIT_PASS`] when every check passes,
//! [`EXIT_FAIL`] when any check fails, [`EXIT_CONFIG`] for configuration,
//! parse and I/O errors.

pub mod fuzz;
pub mod run;
pub mod scenario;

pub use fuzz::{fuzz_identity, FuzzReport};
pub use run::{run_checks, sample_scenario, Report};
pub use scenario::{load_scenario, parse_scenario, ScenarioConfig};

use crate::error::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Exit code for an error that stopped a run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SolverCoverage { .. } => EXIT_FAIL,
        _ => EXIT_CONFIG,
    }
}
