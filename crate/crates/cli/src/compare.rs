//! HA-Asyn against HA-Sync and HU-Sync, per (T, E) cell.

use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::SummaryRow;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub c: u64,
    pub obj_ha_asyn: Option<f64>,
    pub obj_ha_sync: Option<f64>,
    pub obj_hu_sync: Option<f64>,
    pub obj_gain_vs_sync_pct: Option<f64>,
    pub obj_gain_vs_hu_pct: Option<f64>,
    pub ctt_ha_asyn: Option<f64>,
    pub ctt_ha_sync: Option<f64>,
    pub ctt_hu_sync: Option<f64>,
    pub ctt_reduction_vs_sync_pct: Option<f64>,
    pub ctt_reduction_vs_hu_pct: Option<f64>,
}

/// `(reference - value) / reference * 100`.
pub fn reduction_pct(reference: f64, value: f64) -> Option<f64> {
    (reference != 0.0).then(|| (reference - value) / reference * 100.0)
}

/// `(value - reference) / reference * 100`.
pub fn gain_pct(reference: f64, value: f64) -> Option<f64> {
    (reference != 0.0).then(|| (value - reference) / reference * 100.0)
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn key(v: f64) -> u64 {
    v.to_bits()
}

/// Rows sharing scheme, T, E and c (e.g. several seeds) are averaged. The
/// synchronous references use the smallest c present in their cell.
pub fn compare_report(rows: &[SummaryRow]) -> CliResult<Vec<CompareRow>> {
    let mut cells: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        if !cells.iter().any(|&(t, e)| key(t) == key(r.t) && key(e) == key(r.e)) {
            cells.push((r.t, r.e));
        }
    }
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for (t, e) in cells {
        let in_cell = |scheme: &str| -> Vec<&SummaryRow> {
            rows.iter().filter(|r| r.scheme == scheme && key(r.t) == key(t) && key(r.e) == key(e)).collect()
        };
        let asyn = in_cell("HA-Asyn");
        let sync = in_cell("HA-Sync");
        let hu = in_cell("HU-Sync");
        if asyn.is_empty() {
            missing.push(format!("T={t} E={e} HA-Asyn"));
        }
        if sync.is_empty() {
            missing.push(format!("T={t} E={e} HA-Sync"));
        }
        if asyn.is_empty() || sync.is_empty() {
            continue;
        }
        let lowest_c = |group: &[&SummaryRow]| -> Vec<SummaryRow> {
            let c = group.iter().map(|r| r.c).min();
            group.iter().filter(|r| Some(r.c) == c).map(|r| (*r).clone()).collect()
        };
        let sync = lowest_c(&sync);
        let hu = lowest_c(&hu);
        let obj_sync = mean(sync.iter().map(|r| r.obj_mean_tau));
        let ctt_sync = mean(sync.iter().map(|r| r.cycles_to_threshold.map(|v| v as f64)));
        let obj_hu = mean(hu.iter().map(|r| r.obj_mean_tau));
        let ctt_hu = mean(hu.iter().map(|r| r.cycles_to_threshold.map(|v| v as f64)));

        let mut cs: Vec<u64> = asyn.iter().map(|r| r.c).collect();
        cs.sort_unstable();
        cs.dedup();
        for c in cs {
            let at_c: Vec<&&SummaryRow> = asyn.iter().filter(|r| r.c == c).collect();
            let obj = mean(at_c.iter().map(|r| r.obj_mean_tau));
            let ctt = mean(at_c.iter().map(|r| r.cycles_to_threshold.map(|v| v as f64)));
            let both = |a: Option<f64>, b: Option<f64>, f: fn(f64, f64) -> Option<f64>| match (a, b) {
                (Some(r), Some(v)) => f(r, v),
                _ => None,
            };
            out.push(CompareRow {
                t,
                e,
                c,
                obj_ha_asyn: obj,
                obj_ha_sync: obj_sync,
                obj_hu_sync: obj_hu,
                obj_gain_vs_sync_pct: both(obj_sync, obj, gain_pct),
                obj_gain_vs_hu_pct: both(obj_hu, obj, gain_pct),
                ctt_ha_asyn: ctt,
                ctt_ha_sync: ctt_sync,
                ctt_hu_sync: ctt_hu,
                ctt_reduction_vs_sync_pct: both(ctt_sync, ctt, reduction_pct),
                ctt_reduction_vs_hu_pct: both(ctt_hu, ctt, reduction_pct),
            });
        }
    }
    if !missing.is_empty() {
        return Err(CliError::MissingCells(missing));
    }
    Ok(out)
}
