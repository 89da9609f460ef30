use std::path::{Path, PathBuf};

use mel_core::mel_sim::{run_experiment, ScenarioSpec, SimTrace};
use rayon::prelude::*;

use crate::error::CliResult;
use crate::manifest::SuiteManifest;
use crate::output::{render_summary, render_trace, write_atomic, SummaryRow};

pub const SUMMARY_FILE: &str = "summary.csv";

pub fn trace_file_name(spec: &ScenarioSpec) -> String {
    format!("{}.trace.csv", spec.id)
}

/// Outcome of one scenario in a suite.
#[derive(Debug)]
pub struct ScenarioResult {
    pub row: SummaryRow,
    pub trace: Option<SimTrace>,
    /// Why the run stopped early or could not start.
    pub failure: Option<String>,
}

#[derive(Debug)]
pub struct SuiteReport {
    pub results: Vec<ScenarioResult>,
    pub summary_path: PathBuf,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.failure.is_some()).count()
    }
}

/// Runs one scenario and writes its trace into `out`.
pub fn run_scenario(spec: &ScenarioSpec, out: &Path) -> CliResult<ScenarioResult> {
    match run_experiment(spec) {
        Ok(trace) => {
            write_atomic(&out.join(trace_file_name(spec)), &render_trace(spec, &trace)?)?;
            let failure = trace.failure.as_ref().map(|f| format!("cycle {}: {}", f.cycle, f.message));
            Ok(ScenarioResult { row: SummaryRow::from_trace(spec, &trace), trace: Some(trace), failure })
        }
        Err(e) => Ok(ScenarioResult { row: SummaryRow::failed(spec), trace: None, failure: Some(e.to_string()) }),
    }
}

/// Runs every scenario (in parallel, results kept in manifest order), writes
/// one trace per scenario and the summary last. Scenario failures are
/// recorded in the summary; only I/O errors stop the suite.
pub fn run_suite(manifest: &SuiteManifest, out: &Path) -> CliResult<SuiteReport> {
    std::fs::create_dir_all(out)?;
    let results: Vec<ScenarioResult> =
        manifest.scenarios.par_iter().map(|s| run_scenario(s, out)).collect::<CliResult<_>>()?;
    let mut comments = vec![
        format!("suite={}", manifest.id),
        format!("created={}", manifest.created),
        format!("tool_version={}", manifest.tool_version),
        format!("input_sha256={}", manifest.input_hash),
        format!("scenarios={}", manifest.scenarios.len()),
    ];
    for (spec, r) in manifest.scenarios.iter().zip(&results) {
        if let Some(f) = &r.failure {
            comments.push(format!("failed {}: {}", spec.id, f.replace('\n', " ")));
        }
    }
    let rows: Vec<SummaryRow> = results.iter().map(|r| r.row.clone()).collect();
    let summary_path = out.join(SUMMARY_FILE);
    write_atomic(&summary_path, &render_summary(&comments, &rows)?)?;
    Ok(SuiteReport { results, summary_path })
}
