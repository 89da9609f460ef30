//! Asynchronous allocation: every learner gets its own update count `tau_k`,
//! with the spread `max tau - min tau` capped by the staleness bound `c`.
//!
//! The heterogeneity-aware pipeline suggests a synchronous point (dual SDP
//! candidate, or the bisection oracle when the SDP path fails), improves it by
//! coordinate descent, floors it to integers and repairs the batch sum.

mod baseline;
mod brute;
mod cd;
mod integer;

pub use baseline::{hu_equal_allocation, HuMode};
pub use brute::{brute_force_small, BRUTE_FORCE_LIMIT};
pub use cd::{improve_cd, CdRun, ContinuousAllocation, CD_MAX_SWEEPS, CD_TOLERANCE};
pub use integer::{floor_and_repair, integer_sync, integer_waterfill, polish};

use serde::{Deserialize, Serialize};

use crate::error::{MelError, Result};
use crate::problem::{AllocationProblem, AsyncProblem};
use crate::sdp_kernel::BarrierParams;
use crate::sync_relax::{
    assemble_qcqp, bisection_oracle, extract_candidate, solve_dual_sdp, SyncSolution, SyncSource,
};

/// Integer allocation with its predicted per-learner costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub tau: Vec<u64>,
    pub d: Vec<u64>,
    pub predicted_time: Vec<f64>,
    pub predicted_energy: Vec<f64>,
    /// Mean of `tau`.
    pub objective: f64,
    pub staleness: u64,
}

impl Allocation {
    pub fn new(prob: &AllocationProblem, tau: Vec<u64>, d: Vec<u64>) -> Self {
        let predicted_time = (0..tau.len())
            .map(|k| prob.coeffs[k].predict_time(tau[k] as f64, d[k] as f64))
            .collect();
        let predicted_energy = (0..tau.len())
            .map(|k| prob.coeffs[k].predict_energy(tau[k] as f64, d[k] as f64))
            .collect();
        let objective = tau.iter().map(|&t| t as f64).sum::<f64>() / tau.len().max(1) as f64;
        let staleness = staleness(&tau);
        Self { tau, d, predicted_time, predicted_energy, objective, staleness }
    }

    pub fn num_learners(&self) -> usize {
        self.tau.len()
    }
}

/// Largest pairwise difference of update counts.
pub fn staleness(tau: &[u64]) -> u64 {
    match (tau.iter().max(), tau.iter().min()) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0,
    }
}

/// Every constraint the allocation breaks, recomputed from the raw coefficients.
pub fn check_allocation(prob: &AsyncProblem, alloc: &Allocation) -> Vec<String> {
    let p = &prob.base;
    let k = p.num_learners();
    let mut out = Vec::new();
    if alloc.tau.len() != k || alloc.d.len() != k {
        out.push(format!("allocation has {} / {} entries for {} learners", alloc.tau.len(), alloc.d.len(), k));
        return out;
    }
    for i in 0..k {
        let (tau, d) = (alloc.tau[i] as f64, alloc.d[i] as f64);
        let c = &p.coeffs[i];
        let time = c.c2 * tau * d + c.c1 * d + c.c0;
        let energy = c.g2 * tau * d + c.g1 * d + c.g0;
        if time > p.deadline_s {
            out.push(format!("learner {i}: time {time:.6} s > T = {}", p.deadline_s));
        }
        if energy > p.energy_caps_j[i] {
            out.push(format!("learner {i}: energy {energy:.6} J > cap {}", p.energy_caps_j[i]));
        }
        if alloc.d[i] < p.batch_floor {
            out.push(format!("learner {i}: batch {} < floor {}", alloc.d[i], p.batch_floor));
        }
    }
    let sum: u64 = alloc.d.iter().sum();
    if sum != p.total_batch {
        out.push(format!("batches sum to {sum}, expected {}", p.total_batch));
    }
    for a in 0..k {
        for b in 0..k {
            if alloc.tau[a] > alloc.tau[b] && alloc.tau[a] - alloc.tau[b] > prob.staleness_cap {
                out.push(format!(
                    "learners {a},{b}: staleness {} > c = {}",
                    alloc.tau[a] - alloc.tau[b],
                    prob.staleness_cap
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "HA-Sync")]
    HaSync,
    #[serde(rename = "HA-Asyn")]
    HaAsyn,
    #[serde(rename = "HU-Sync")]
    HuSync,
    #[serde(rename = "HU-Asyn")]
    HuAsyn,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::HaSync, Scheme::HaAsyn, Scheme::HuSync, Scheme::HuAsyn];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::HaSync => "HA-Sync",
            Scheme::HaAsyn => "HA-Asyn",
            Scheme::HuSync => "HU-Sync",
            Scheme::HuAsyn => "HU-Asyn",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = MelError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['_', ' '], "-");
        match norm.as_str() {
            "ha-sync" => Ok(Scheme::HaSync),
            "ha-asyn" | "ha-async" => Ok(Scheme::HaAsyn),
            "hu-sync" => Ok(Scheme::HuSync),
            "hu-asyn" | "hu-async" => Ok(Scheme::HuAsyn),
            _ => Err(MelError::InvalidInput(format!("unknown scheme '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SaiOptions {
    /// Use the dual SDP for the suggest step and the upper bound.
    pub use_sdp: bool,
    pub barrier: BarrierParams,
}

impl Default for SaiOptions {
    fn default() -> Self {
        Self { use_sdp: true, barrier: BarrierParams::default() }
    }
}

/// Result of running one allocation scheme.
#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub allocation: Allocation,
    /// Upper bound on the synchronous relaxation, when the SDP was solved.
    pub dual_bound: Option<f64>,
    /// Objective of the continuous improve step (HA-Asyn only).
    pub continuous_objective: Option<f64>,
    /// Where the synchronous starting point came from (HA-Asyn only).
    pub suggest_source: Option<SyncSource>,
}

/// Synchronous starting point plus, when available, the SDP upper bound.
pub fn suggest(prob: &AllocationProblem, opts: &SaiOptions) -> Result<(SyncSolution, Option<f64>)> {
    prob.validate()?;
    if opts.use_sdp {
        let attempt = assemble_qcqp(prob).and_then(|q| {
            let dual = solve_dual_sdp(&q, &opts.barrier)?;
            let cand = extract_candidate(&dual.multipliers, &q, prob)?;
            Ok((cand, dual.tau_bound))
        });
        if let Ok((cand, bound)) = attempt {
            return Ok((cand, Some(bound)));
        }
    }
    Ok((bisection_oracle(prob)?, None))
}

/// Only the SDP upper bound, `None` if the kernel fails.
pub fn dual_bound(prob: &AllocationProblem, opts: &SaiOptions) -> Option<f64> {
    let q = assemble_qcqp(prob).ok()?;
    solve_dual_sdp(&q, &opts.barrier).ok().map(|d| d.tau_bound)
}

/// Heterogeneity-aware asynchronous allocation.
///
/// Candidates are the exact integer synchronous allocation and, for every
/// staleness stage `s <= c`, the floored and polished improve-step point; the
/// best by mean `tau` wins (earliest on ties).
pub fn ha_asyn(prob: &AsyncProblem, opts: &SaiOptions) -> Result<SchemeOutcome> {
    prob.validate()?;
    let base = &prob.base;
    let (init, bound) = suggest(base, opts)?;
    let sync_int = integer_sync(base)?;
    let stages = improve_cd(&init, prob)?;

    let mut best = sync_int;
    for (s, cont) in stages.stages.iter().enumerate() {
        let cap = stages.stage_caps[s];
        let staged = AsyncProblem::new(base.clone(), cap);
        let mut cands = Vec::with_capacity(2);
        if let Ok(a) = floor_and_repair(cont, &staged) {
            cands.push(polish(&a, &staged));
        }
        cands.push(polish(&best, &staged));
        for c in cands {
            if c.objective > best.objective {
                best = c;
            }
        }
    }
    Ok(SchemeOutcome {
        scheme: Scheme::HaAsyn,
        allocation: best,
        dual_bound: bound,
        continuous_objective: Some(stages.objective()),
        suggest_source: Some(init.source),
    })
}

/// Runs one scheme end to end.
pub fn solve_scheme(prob: &AsyncProblem, scheme: Scheme, opts: &SaiOptions) -> Result<SchemeOutcome> {
    prob.validate()?;
    match scheme {
        Scheme::HaAsyn => ha_asyn(prob, opts),
        Scheme::HaSync => {
            let allocation = integer_sync(&prob.base)?;
            let bound = if opts.use_sdp { dual_bound(&prob.base, opts) } else { None };
            Ok(SchemeOutcome { scheme, allocation, dual_bound: bound, continuous_objective: None, suggest_source: None })
        }
        Scheme::HuSync | Scheme::HuAsyn => {
            let mode = if scheme == Scheme::HuSync { HuMode::Sync } else { HuMode::Async };
            let allocation = hu_equal_allocation(prob, mode)?;
            Ok(SchemeOutcome { scheme, allocation, dual_bound: None, continuous_objective: None, suggest_source: None })
        }
    }
}
