//! Trace and summary CSV files. Metadata goes in leading `#` lines; the body
//! below them is a pure function of the scenario.

use std::io::Write;
use std::path::Path;

use mel_core::mel_sim::{ScenarioSpec, SimTrace};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TRACE_HEADER: [&str; 9] = ["cycle", "learner", "tau", "d", "time_s", "energy_j", "staleness", "loss", "acc"];
pub const SUMMARY_HEADER: [&str; 10] = [
    "scenario_id",
    "scheme",
    "c",
    "T",
    "E",
    "obj_mean_tau",
    "dual_bound",
    "cycles_to_threshold",
    "final_loss",
    "final_acc",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub cycle: usize,
    pub learner: usize,
    pub tau: u64,
    pub d: u64,
    pub time_s: f64,
    pub energy_j: f64,
    /// Realized staleness of the cycle (max tau - min tau).
    pub staleness: u64,
    pub loss: f64,
    pub acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub scheme: String,
    pub c: u64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub obj_mean_tau: Option<f64>,
    pub dual_bound: Option<f64>,
    pub cycles_to_threshold: Option<usize>,
    pub final_loss: Option<f64>,
    pub final_acc: Option<f64>,
}

impl SummaryRow {
    pub fn from_trace(spec: &ScenarioSpec, trace: &SimTrace) -> Self {
        let n = trace.ledgers.len();
        let obj = (n > 0).then(|| trace.ledgers.iter().map(|l| l.objective).sum::<f64>() / n as f64);
        let bound = trace.ledgers.iter().find_map(|l| l.dual_bound);
        Self {
            scenario_id: spec.id.clone(),
            scheme: spec.scheme.to_string(),
            c: spec.staleness,
            t: spec.deadline_s,
            e: spec.mean_energy_j,
            obj_mean_tau: obj,
            dual_bound: bound,
            cycles_to_threshold: trace.cycles_to_threshold,
            final_loss: Some(trace.final_loss()),
            final_acc: trace.final_accuracy(),
        }
    }

    /// Row for a scenario that could not even start.
    pub fn failed(spec: &ScenarioSpec) -> Self {
        Self {
            scenario_id: spec.id.clone(),
            scheme: spec.scheme.to_string(),
            c: spec.staleness,
            t: spec.deadline_s,
            e: spec.mean_energy_j,
            obj_mean_tau: None,
            dual_bound: None,
            cycles_to_threshold: None,
            final_loss: None,
            final_acc: None,
        }
    }
}

pub fn trace_rows(trace: &SimTrace) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for l in &trace.ledgers {
        for (k, lc) in l.learners.iter().enumerate() {
            rows.push(TraceRow {
                cycle: l.cycle,
                learner: k,
                tau: lc.tau,
                d: lc.d,
                time_s: lc.time_s,
                energy_j: lc.energy_j,
                staleness: l.staleness,
                loss: l.loss,
                acc: l.accuracy,
            });
        }
    }
    rows
}

/// Scenario constants a trace is checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub scenario: String,
    pub scheme: String,
    pub deadline_s: f64,
    pub staleness: u64,
    pub total_batch: u64,
    pub batch_floor: u64,
    pub energy_caps_j: Vec<f64>,
}

impl TraceMeta {
    pub fn new(spec: &ScenarioSpec, trace: &SimTrace) -> Self {
        Self {
            scenario: spec.id.clone(),
            scheme: spec.scheme.to_string(),
            deadline_s: spec.deadline_s,
            staleness: spec.staleness,
            total_batch: spec.total_batch,
            batch_floor: spec.batch_floor,
            energy_caps_j: trace.profiles.iter().map(|p| p.energy_cap_j).collect(),
        }
    }

    fn lines(&self) -> Vec<String> {
        let caps: Vec<String> = self.energy_caps_j.iter().map(|v| format!("{v}")).collect();
        vec![
            format!("scenario={}", self.scenario),
            format!("scheme={}", self.scheme),
            format!("deadline_s={}", self.deadline_s),
            format!("staleness={}", self.staleness),
            format!("total_batch={}", self.total_batch),
            format!("batch_floor={}", self.batch_floor),
            format!("energy_caps_j={}", caps.join(";")),
        ]
    }

    fn parse(lines: &[String], path: &Path) -> CliResult<Self> {
        let get = |key: &str| -> CliResult<&str> {
            lines
                .iter()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| CliError::parse(path, format!("trace metadata lacks '{key}'")))
        };
        let num = |key: &str| -> CliResult<f64> {
            get(key)?.parse().map_err(|_| CliError::parse(path, format!("bad value for '{key}'")))
        };
        let int = |key: &str| -> CliResult<u64> {
            get(key)?.parse().map_err(|_| CliError::parse(path, format!("bad value for '{key}'")))
        };
        let caps = get("energy_caps_j")?
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::parse(path, "bad value for 'energy_caps_j'"))?;
        Ok(Self {
            scenario: get("scenario")?.to_string(),
            scheme: get("scheme")?.to_string(),
            deadline_s: num("deadline_s")?,
            staleness: int("staleness")?,
            total_batch: int("total_batch")?,
            batch_floor: int("batch_floor")?,
            energy_caps_j: caps,
        })
    }
}

fn csv_body<T: Serialize>(header: &[&str], rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn with_comments(comments: &[String], body: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 64 * comments.len());
    for c in comments {
        out.extend_from_slice(b"# ");
        out.extend_from_slice(c.as_bytes());
        out.push(b'\n');
    }
    out.extend(body);
    out
}

pub fn render_trace(spec: &ScenarioSpec, trace: &SimTrace) -> CliResult<Vec<u8>> {
    let mut meta = TraceMeta::new(spec, trace).lines();
    meta.push(format!("stop={}", stop_name(trace)));
    if let Some(f) = &trace.failure {
        meta.push(format!("failure=cycle {} ({:?}): {}", f.cycle, f.kind, f.message.replace('\n', " ")));
    }
    Ok(with_comments(&meta, csv_body(&TRACE_HEADER, &trace_rows(trace))?))
}

fn stop_name(trace: &SimTrace) -> &'static str {
    match trace.stop {
        mel_core::mel_sim::StopReason::CycleBudget => "cycle_budget",
        mel_core::mel_sim::StopReason::Threshold => "threshold",
        mel_core::mel_sim::StopReason::Aborted => "aborted",
    }
}

pub fn render_summary(comments: &[String], rows: &[SummaryRow]) -> CliResult<Vec<u8>> {
    Ok(with_comments(comments, csv_body(&SUMMARY_HEADER, rows)?))
}

/// Everything after the leading `#` lines.
pub fn csv_body_of(bytes: &[u8]) -> &[u8] {
    let mut pos = 0;
    while pos < bytes.len() && bytes[pos] == b'#' {
        match bytes[pos..].iter().position(|&b| b == b'\n') {
            Some(n) => pos += n + 1,
            None => return &[],
        }
    }
    &bytes[pos..]
}

fn split_comments(text: &str) -> (Vec<String>, &str) {
    let body = std::str::from_utf8(csv_body_of(text.as_bytes())).expect("split on ASCII boundary");
    let head = &text[..text.len() - body.len()];
    let comments = head.lines().map(|l| l.trim_start_matches('#').trim().to_string()).collect();
    (comments, body)
}

fn read_rows<T: for<'de> Deserialize<'de>>(body: &str, header: &[&str], path: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(CliError::parse(path, format!("expected columns {} but found {}", header.join(","), found.join(","))));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| CliError::parse(path, format!("row {}: {e}", i + 1))))
        .collect()
}

pub fn read_trace(path: &Path) -> CliResult<(TraceMeta, Vec<TraceRow>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(path, e.to_string()))?;
    let (comments, body) = split_comments(&text);
    let meta = TraceMeta::parse(&comments, path)?;
    Ok((meta, read_rows(body, &TRACE_HEADER, path)?))
}

pub fn read_summary(path: &Path) -> CliResult<Vec<SummaryRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(path, e.to_string()))?;
    let (_, body) = split_comments(&text);
    read_rows(body, &SUMMARY_HEADER, path)
}
