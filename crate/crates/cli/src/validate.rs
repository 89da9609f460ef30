//! Re-checks a written trace against the per-cycle invariants.

use std::collections::BTreeMap;

use mel_core::mel_sim::{generate_learners, ScenarioSpec};
use mel_core::CostCoeffs;

use crate::output::{TraceMeta, TraceRow};

const RTOL: f64 = 1e-9;

/// Every broken invariant, in row order. With a scenario, the logged costs
/// are also recomputed from regenerated learner profiles.
pub fn validate_trace(meta: &TraceMeta, rows: &[TraceRow], scenario: Option<&ScenarioSpec>) -> Vec<String> {
    let mut out = Vec::new();
    let k = meta.energy_caps_j.len();
    let coeffs: Option<Vec<CostCoeffs>> = scenario.map(|s| {
        generate_learners(s, s.seed).iter().map(|p| CostCoeffs::from_profile(p, &s.system)).collect()
    });
    if let Some(c) = &coeffs {
        if c.len() != k {
            out.push(format!("scenario has {} learners, trace metadata {}", c.len(), k));
            return out;
        }
    }

    let mut cycles: BTreeMap<usize, Vec<&TraceRow>> = BTreeMap::new();
    for r in rows {
        cycles.entry(r.cycle).or_default().push(r);
    }
    for (expect, (&g, group)) in (1..).zip(&cycles) {
        if g != expect {
            out.push(format!("cycle {g}: expected cycle {expect}"));
        }
        let learners: Vec<usize> = group.iter().map(|r| r.learner).collect();
        if learners != (0..k).collect::<Vec<_>>() {
            out.push(format!("cycle {g}: learner rows {learners:?}, expected 0..{k}"));
            continue;
        }
        let hi = group.iter().map(|r| r.tau).max().unwrap_or(0);
        let lo = group.iter().map(|r| r.tau).min().unwrap_or(0);
        let sum: u64 = group.iter().map(|r| r.d).sum();
        if sum != meta.total_batch {
            out.push(format!("cycle {g}: batches sum to {sum}, expected {}", meta.total_batch));
        }
        if hi - lo > meta.staleness {
            out.push(format!("cycle {g}: staleness {} > c = {}", hi - lo, meta.staleness));
        }
        for r in group {
            let i = r.learner;
            if r.staleness != hi - lo {
                out.push(format!("cycle {g} learner {i}: staleness column {} != {}", r.staleness, hi - lo));
            }
            if r.time_s > meta.deadline_s * (1.0 + RTOL) {
                out.push(format!("cycle {g} learner {i}: time {} s > T = {}", r.time_s, meta.deadline_s));
            }
            if r.energy_j > meta.energy_caps_j[i] * (1.0 + RTOL) {
                out.push(format!("cycle {g} learner {i}: energy {} J > cap {}", r.energy_j, meta.energy_caps_j[i]));
            }
            if r.d < meta.batch_floor {
                out.push(format!("cycle {g} learner {i}: batch {} < floor {}", r.d, meta.batch_floor));
            }
            if !r.loss.is_finite() {
                out.push(format!("cycle {g}: non-finite loss"));
            }
            if r.acc.is_some_and(|a| !(0.0..=1.0).contains(&a)) {
                out.push(format!("cycle {g}: accuracy outside [0, 1]"));
            }
            if let Some(c) = &coeffs {
                let (tau, d) = (r.tau as f64, r.d as f64);
                let time = c[i].predict_time(tau, d);
                let energy = c[i].predict_energy(tau, d);
                if (time - r.time_s).abs() > RTOL * time.abs().max(1.0) {
                    out.push(format!("cycle {g} learner {i}: logged time {} != modeled {time}", r.time_s));
                }
                if (energy - r.energy_j).abs() > RTOL * energy.abs().max(1.0) {
                    out.push(format!("cycle {g} learner {i}: logged energy {} != modeled {energy}", r.energy_j));
                }
            }
        }
    }
    out
}
