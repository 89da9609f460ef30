//! Scenario files, experiment suites and CSV reports for the `mel` binary.

pub mod compare;
pub mod error;
pub mod manifest;
pub mod output;
pub mod suite;
pub mod table;
pub mod validate;

pub use compare::{compare_report, CompareRow};
pub use error::{CliError, CliResult};
pub use manifest::{parse_manifest, parse_scenario, SuiteManifest};
pub use output::{read_summary, read_trace, SummaryRow, TraceRow};
pub use suite::{run_suite, SuiteReport};
pub use validate::validate_trace;
