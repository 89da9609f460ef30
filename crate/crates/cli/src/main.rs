use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mel_cli::error::{CliError, CliResult};
use mel_cli::manifest::{apply_overrides, parse_manifest, parse_scenario};
use mel_cli::suite::{run_scenario, run_suite, trace_file_name};
use mel_cli::table::{fixed, opt, render, Format};
use mel_cli::{compare_report, read_summary, read_trace, validate_trace};
use mel_core::async_sai::{solve_scheme, SaiOptions};
use mel_core::mel_sim::generate_learners;
use mel_core::{AllocationProblem, AsyncProblem, Scheme};

#[derive(Parser)]
#[command(name = "mel", version, about = "Task allocation and simulation for asynchronous mobile edge learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the allocation scheme (HA-Sync, HA-Asyn, HU-Sync, HU-Asyn).
    #[arg(long, global = true)]
    scheme: Option<Scheme>,
    /// Override the staleness cap c.
    #[arg(long, global = true)]
    staleness: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one allocation for a scenario and print it.
    Allocate { scenario: PathBuf },
    /// Run one scenario and write its trace.
    Simulate { scenario: PathBuf },
    /// Run every scenario of a manifest; writes traces and summary.csv.
    Suite { manifest: PathBuf },
    /// Compare HA-Asyn with HA-Sync and HU-Sync across summary files.
    Compare {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
    /// Re-check a trace against the per-cycle invariants.
    Validate {
        trace: PathBuf,
        /// Scenario the trace came from; enables cost recomputation.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Allocate { scenario } => allocate(cli, scenario),
        Command::Simulate { scenario } => simulate(cli, scenario),
        Command::Suite { manifest } => suite(cli, manifest),
        Command::Compare { summaries } => compare(cli, summaries),
        Command::Validate { trace, scenario } => validate(cli, trace, scenario.as_deref()),
    }
}

fn load_scenario(cli: &Cli, path: &Path) -> CliResult<mel_core::mel_sim::ScenarioSpec> {
    let mut spec = parse_scenario(path)?;
    apply_overrides(&mut spec, cli.seed, cli.scheme, cli.staleness);
    spec.validate().map_err(|e| CliError::parse(path, e.to_string()))?;
    Ok(spec)
}

fn allocate(cli: &Cli, path: &Path) -> CliResult<u8> {
    let spec = load_scenario(cli, path)?;
    let profiles = generate_learners(&spec, spec.seed);
    let base = AllocationProblem::from_profiles(&profiles, &spec.system, spec.deadline_s, spec.total_batch, spec.batch_floor);
    let prob = AsyncProblem::new(base, spec.staleness);
    let opts = SaiOptions { use_sdp: spec.use_sdp, ..SaiOptions::default() };
    let outcome = solve_scheme(&prob, spec.scheme, &opts)?;
    let a = &outcome.allocation;
    let rows: Vec<Vec<String>> = (0..a.num_learners())
        .map(|k| {
            vec![
                k.to_string(),
                format!("{}", profiles[k].cpu_freq_hz / 1e9),
                a.tau[k].to_string(),
                a.d[k].to_string(),
                fixed(Some(a.predicted_time[k]), 6),
                fixed(Some(a.predicted_energy[k]), 6),
                fixed(Some(prob.base.energy_caps_j[k]), 6),
            ]
        })
        .collect();
    print!("{}", render(cli.format, &["learner", "freq_ghz", "tau", "d", "time_s", "energy_j", "cap_j"], &rows));
    eprintln!(
        "scheme {}  c = {}  mean tau = {}  staleness = {}  dual bound = {}",
        spec.scheme,
        spec.staleness,
        a.objective,
        a.staleness,
        outcome.dual_bound.map_or("-".into(), |b| format!("{b:.6}"))
    );
    Ok(0)
}

fn summary_table(format: Format, rows: &[mel_cli::SummaryRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.scenario_id.clone(),
                r.scheme.clone(),
                r.c.to_string(),
                format!("{}", r.t),
                format!("{}", r.e),
                fixed(r.obj_mean_tau, 3),
                fixed(r.dual_bound, 3),
                r.cycles_to_threshold.map(|v| v.to_string()).unwrap_or_default(),
                fixed(r.final_loss, 5),
                fixed(r.final_acc, 4),
            ]
        })
        .collect();
    render(format, &mel_cli::output::SUMMARY_HEADER, &body)
}

fn simulate(cli: &Cli, path: &Path) -> CliResult<u8> {
    let spec = load_scenario(cli, path)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;
    let result = run_scenario(&spec, &out)?;
    print!("{}", summary_table(cli.format, std::slice::from_ref(&result.row)));
    eprintln!("trace written to {}", out.join(trace_file_name(&spec)).display());
    match (&result.trace, &result.failure) {
        (Some(trace), Some(msg)) => {
            eprintln!("run aborted at {msg}");
            let kind = trace.failure.as_ref().map(|f| f.kind);
            Ok(match kind {
                Some(mel_core::mel_sim::FailureKind::Infeasible) => 3,
                Some(mel_core::mel_sim::FailureKind::NonConvergence) => 4,
                _ => 1,
            })
        }
        (None, Some(msg)) => {
            eprintln!("error: {msg}");
            Ok(1)
        }
        _ => Ok(0),
    }
}

fn suite(cli: &Cli, path: &Path) -> CliResult<u8> {
    let mut manifest = parse_manifest(path)?;
    if cli.scheme.is_some() || cli.staleness.is_some() {
        return Err(CliError::parse(path, "--scheme and --staleness apply to single scenarios; use [sweep] in a manifest"));
    }
    if let Some(seed) = cli.seed {
        let distinct: std::collections::BTreeSet<u64> = manifest.scenarios.iter().map(|s| s.seed).collect();
        if distinct.len() > 1 {
            return Err(CliError::parse(path, "--seed conflicts with a manifest that sweeps seeds"));
        }
        for s in &mut manifest.scenarios {
            s.seed = seed;
        }
    }
    let out = cli.out.clone().or_else(|| manifest.out_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let report = run_suite(&manifest, &out)?;
    let rows: Vec<_> = report.results.iter().map(|r| r.row.clone()).collect();
    print!("{}", summary_table(cli.format, &rows));
    eprintln!(
        "{} scenarios, {} failed; summary at {}",
        rows.len(),
        report.failures(),
        report.summary_path.display()
    );
    Ok(0)
}

fn compare(cli: &Cli, paths: &[PathBuf]) -> CliResult<u8> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_summary(p)?);
    }
    let report = compare_report(&rows)?;
    let header = [
        "T",
        "E",
        "c",
        "obj_ha_asyn",
        "obj_ha_sync",
        "obj_hu_sync",
        "obj_gain_vs_sync_pct",
        "obj_gain_vs_hu_pct",
        "ctt_ha_asyn",
        "ctt_ha_sync",
        "ctt_hu_sync",
        "ctt_reduction_vs_sync_pct",
        "ctt_reduction_vs_hu_pct",
    ];
    let body: Vec<Vec<String>> = report
        .iter()
        .map(|r| {
            vec![
                format!("{}", r.t),
                format!("{}", r.e),
                r.c.to_string(),
                opt(r.obj_ha_asyn),
                opt(r.obj_ha_sync),
                opt(r.obj_hu_sync),
                fixed(r.obj_gain_vs_sync_pct, 2),
                fixed(r.obj_gain_vs_hu_pct, 2),
                opt(r.ctt_ha_asyn),
                opt(r.ctt_ha_sync),
                opt(r.ctt_hu_sync),
                fixed(r.ctt_reduction_vs_sync_pct, 2),
                fixed(r.ctt_reduction_vs_hu_pct, 2),
            ]
        })
        .collect();
    let text = render(cli.format, &header, &body);
    if let Some(out) = &cli.out {
        std::fs::create_dir_all(out)?;
        mel_cli::output::write_atomic(&out.join("compare.csv"), render(Format::Csv, &header, &body).as_bytes())?;
    }
    print!("{text}");
    Ok(0)
}

fn validate(cli: &Cli, trace: &Path, scenario: Option<&Path>) -> CliResult<u8> {
    let (meta, rows) = read_trace(trace)?;
    let spec = scenario.map(|p| load_scenario(cli, p)).transpose()?;
    let violations = validate_trace(&meta, &rows, spec.as_ref());
    if violations.is_empty() {
        let cycles = rows.iter().map(|r| r.cycle).max().unwrap_or(0);
        println!("ok: {} rows over {} cycles, no violations", rows.len(), cycles);
        return Ok(0);
    }
    for v in &violations {
        println!("{v}");
    }
    Err(CliError::Violations(violations))
}

