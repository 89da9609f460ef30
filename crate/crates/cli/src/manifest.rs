//! Scenario files and suite manifests (TOML).

use std::path::{Path, PathBuf};

use mel_core::mel_sim::ScenarioSpec;
use mel_core::Scheme;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Parses and validates a scenario from TOML text. `origin` only labels errors.
pub fn parse_scenario_str(text: &str, origin: &Path) -> CliResult<ScenarioSpec> {
    let spec: ScenarioSpec = toml::from_str(text).map_err(|e| CliError::parse(origin, e.to_string()))?;
    spec.validate().map_err(|e| CliError::parse(origin, e.to_string()))?;
    Ok(spec)
}

pub fn parse_scenario(path: &Path) -> CliResult<ScenarioSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(path, e.to_string()))?;
    parse_scenario_str(&text, path)
}

/// Command-line overrides for a single scenario.
pub fn apply_overrides(spec: &mut ScenarioSpec, seed: Option<u64>, scheme: Option<Scheme>, staleness: Option<u64>) {
    if let Some(v) = seed {
        spec.seed = v;
    }
    if let Some(v) = scheme {
        spec.scheme = v;
    }
    if let Some(v) = staleness {
        spec.staleness = v;
    }
}

/// Canonical TOML form of a scenario with every default spelled out.
pub fn canonical_scenario(spec: &ScenarioSpec) -> String {
    toml::to_string(spec).expect("scenario serializes")
}

/// Axes crossed with the base scenario. Empty axes keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub deadline_s: Vec<f64>,
    pub mean_energy_j: Vec<f64>,
    pub staleness: Vec<u64>,
    pub scheme: Vec<Scheme>,
    pub seed: Vec<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    id: String,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    base: Option<ScenarioSpec>,
    #[serde(default)]
    sweep: Option<Sweep>,
    #[serde(default)]
    scenario: Vec<ScenarioSpec>,
}

/// A fully expanded suite.
#[derive(Debug, Clone)]
pub struct SuiteManifest {
    pub id: String,
    pub scenarios: Vec<ScenarioSpec>,
    pub out_dir: Option<PathBuf>,
    /// RFC 3339, filled in when the manifest is loaded.
    pub created: String,
    pub tool_version: String,
    /// SHA-256 of the manifest file bytes.
    pub input_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Crosses the sweep axes in the order T, E, c, scheme, seed.
pub fn expand_sweep(base: &ScenarioSpec, sweep: &Sweep) -> Vec<ScenarioSpec> {
    fn axis<T: Clone>(values: &[T], fallback: T) -> Vec<T> {
        if values.is_empty() {
            vec![fallback]
        } else {
            values.to_vec()
        }
    }
    let ts = axis(&sweep.deadline_s, base.deadline_s);
    let es = axis(&sweep.mean_energy_j, base.mean_energy_j);
    let cs = axis(&sweep.staleness, base.staleness);
    let schemes = axis(&sweep.scheme, base.scheme);
    let seeds = axis(&sweep.seed, base.seed);
    let mut out = Vec::with_capacity(ts.len() * es.len() * cs.len() * schemes.len() * seeds.len());
    for &t in &ts {
        for &e in &es {
            for &c in &cs {
                for &scheme in &schemes {
                    for &seed in &seeds {
                        let mut s = base.clone();
                        s.deadline_s = t;
                        s.mean_energy_j = e;
                        s.staleness = c;
                        s.scheme = scheme;
                        s.seed = seed;
                        s.id = format!("{}-T{}-E{}-c{}-{}", base.id, fmt_num(t), fmt_num(e), c, scheme);
                        if !sweep.seed.is_empty() {
                            s.id += &format!("-s{seed}");
                        }
                        out.push(s);
                    }
                }
            }
        }
    }
    out
}

pub fn parse_manifest_str(text: &str, origin: &Path) -> CliResult<SuiteManifest> {
    let file: ManifestFile = toml::from_str(text).map_err(|e| CliError::parse(origin, e.to_string()))?;
    let mut scenarios = Vec::new();
    match (&file.base, &file.sweep) {
        (Some(base), Some(sweep)) => scenarios.extend(expand_sweep(base, sweep)),
        (Some(base), None) => scenarios.push(base.clone()),
        (None, Some(_)) => return Err(CliError::parse(origin, "[sweep] needs a [base] scenario")),
        (None, None) => {}
    }
    scenarios.extend(file.scenario.iter().cloned());
    if scenarios.is_empty() {
        return Err(CliError::parse(origin, "manifest defines no scenarios"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in &scenarios {
        s.validate().map_err(|e| CliError::parse(origin, format!("scenario '{}': {e}", s.id)))?;
        if !seen.insert(s.id.clone()) {
            return Err(CliError::parse(origin, format!("duplicate scenario id '{}'", s.id)));
        }
        if s.id.is_empty() || s.id.contains(['/', '\\']) {
            return Err(CliError::parse(origin, format!("scenario id '{}' is not a valid file stem", s.id)));
        }
    }
    Ok(SuiteManifest {
        id: file.id,
        scenarios,
        out_dir: file.out,
        created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_hash: sha256_hex(text.as_bytes()),
    })
}

pub fn parse_manifest(path: &Path) -> CliResult<SuiteManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(path, e.to_string()))?;
    parse_manifest_str(&text, path)
}
