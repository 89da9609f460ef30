//! Relaxed synchronous allocation: one common update count `tau` for all learners,
//! continuous batch sizes.
//!
//! Two routes are provided. [`bisection_oracle`] is exact and exploits the
//! monotone structure (feasibility of `tau` only shrinks as `tau` grows).
//! [`solve_dual_sdp`] builds the Lagrangian dual as a single LMI and yields an
//! upper bound on `tau` plus a candidate point through [`extract_candidate`].

mod dual;
mod qcqp;

pub use dual::{
    assemble_dual_functions, extract_candidate, lagrangian_value, lmi_matrix, solve_dual_sdp, DualMultipliers,
    DualSolution,
};
pub use qcqp::{assemble_qcqp, QcqpForm, QuadConstraint};

use serde::{Deserialize, Serialize};

use crate::error::{Budget, MelError, Result};
use crate::problem::AllocationProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyncSource {
    Bisection,
    SdpCandidate,
}

/// A point of the relaxed synchronous problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncSolution {
    pub tau: f64,
    pub d: Vec<f64>,
    pub source: SyncSource,
}

impl SyncSolution {
    pub fn objective(&self) -> f64 {
        self.tau
    }

    /// Largest relative violation over all relaxed constraints (0 when feasible).
    pub fn max_violation(&self, prob: &AllocationProblem) -> f64 {
        let mut worst = 0.0f64;
        let t = prob.deadline_s;
        for (k, c) in prob.coeffs.iter().enumerate() {
            let e = prob.energy_caps_j[k];
            worst = worst.max((c.predict_time(self.tau, self.d[k]) - t) / t);
            worst = worst.max((c.predict_energy(self.tau, self.d[k]) - e) / e);
            worst = worst.max((prob.floor() - self.d[k]) / prob.total());
        }
        let sum: f64 = self.d.iter().sum();
        worst = worst.max((sum - prob.total()).abs() / prob.total());
        worst.max(-self.tau)
    }
}

/// Continuous batch capacities of every learner at `tau`.
pub fn capacities(prob: &AllocationProblem, tau: f64) -> Vec<f64> {
    (0..prob.num_learners()).map(|k| prob.capacity(k, tau)).collect()
}

fn feasible_caps(prob: &AllocationProblem, tau: f64) -> Option<Vec<f64>> {
    let caps = capacities(prob, tau);
    let floor = prob.floor();
    if caps.iter().any(|&c| c < floor) {
        return None;
    }
    if caps.iter().sum::<f64>() < prob.total() {
        return None;
    }
    Some(caps)
}

/// Valid upper bound on the synchronous optimum.
///
/// Some learner must hold at least `d / K` samples, so `tau` cannot exceed the
/// best per-learner update capacity at that batch.
pub fn tau_upper_bound(prob: &AllocationProblem) -> f64 {
    let share = prob.total() / prob.num_learners() as f64;
    (0..prob.num_learners())
        .map(|k| prob.update_capacity(k, share))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Fills batches from the top: `d_k = min(cap_k, L)` with the level `L >= floor`
/// chosen so the batches sum to `total`. Caps must all be `>= floor` and sum to
/// at least `total`.
pub fn waterfill(caps: &[f64], floor: f64, total: f64) -> Vec<f64> {
    let k = caps.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| caps[a].total_cmp(&caps[b]).then(a.cmp(&b)));

    let mut prefix = 0.0;
    let mut level = f64::INFINITY;
    for (pos, &i) in order.iter().enumerate() {
        let remaining = (k - pos) as f64;
        let candidate = (total - prefix) / remaining;
        if candidate <= caps[i] {
            level = candidate;
            break;
        }
        prefix += caps[i];
    }
    let level = level.max(floor);
    let mut d: Vec<f64> = caps.iter().map(|&c| c.min(level)).collect();
    // Push the rounding residue onto an unclamped learner so the sum is exact.
    let residual = total - d.iter().sum::<f64>();
    if let Some(&i) = order.iter().rev().find(|&&i| caps[i] > level) {
        d[i] += residual;
    } else if let Some(&i) = order.last() {
        d[i] += residual;
    }
    d
}

/// Exact solver for the relaxed synchronous problem.
pub fn bisection_oracle(prob: &AllocationProblem) -> Result<SyncSolution> {
    prob.validate()?;
    if feasible_caps(prob, 0.0).is_none() {
        let caps = capacities(prob, 0.0);
        if let Some(k) = caps.iter().position(|&c| c < prob.floor()) {
            return Err(MelError::LearnerInfeasible {
                learner: k,
                budget: Budget::Batch,
                reason: format!("cannot hold the batch floor {} even at tau = 0", prob.batch_floor),
            });
        }
        return Err(MelError::Infeasible(format!(
            "total capacity {:.3} at tau = 0 is below d = {}",
            caps.iter().sum::<f64>(),
            prob.total_batch
        )));
    }

    let mut lo = 0.0;
    let mut hi = tau_upper_bound(prob).max(1.0);
    let mut guard = 0;
    while feasible_caps(prob, hi).is_some() {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(MelError::Numerical("synchronous optimum is unbounded".into()));
        }
    }
    for _ in 0..400 {
        if hi - lo <= 1e-9 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible_caps(prob, mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let caps = feasible_caps(prob, lo).expect("lower bracket is feasible");
    Ok(SyncSolution {
        tau: lo,
        d: waterfill(&caps, prob.floor(), prob.total()),
        source: SyncSource::Bisection,
    })
}

/// Maps a raw point `[tau, d_1..d_K]` onto the relaxed feasible set.
///
/// Batches are clamped to the floor and the excess above the floor is rescaled
/// to hit `d` exactly; `tau` becomes the largest value every learner supports
/// with its batch.
pub fn project_feasible(x: &[f64], prob: &AllocationProblem, source: SyncSource) -> Result<SyncSolution> {
    let k = prob.num_learners();
    if x.len() != k + 1 {
        return Err(MelError::Contract(format!("point has length {}, expected {}", x.len(), k + 1)));
    }
    let floor = prob.floor();
    let excess: Vec<f64> = x[1..]
        .iter()
        .map(|&v| if v.is_finite() { (v - floor).max(0.0) } else { 0.0 })
        .collect();
    let excess_sum: f64 = excess.iter().sum();
    let budget = prob.total() - k as f64 * floor;
    let d: Vec<f64> = if excess_sum > 0.0 {
        excess.iter().map(|e| floor + budget * e / excess_sum).collect()
    } else {
        vec![prob.total() / k as f64; k]
    };
    let mut tau = f64::INFINITY;
    for (i, &di) in d.iter().enumerate() {
        let cap = prob.update_capacity(i, di);
        if cap < 0.0 {
            return Err(MelError::LearnerInfeasible {
                learner: i,
                budget: Budget::Batch,
                reason: format!("projected batch {di:.3} does not fit even at tau = 0"),
            });
        }
        tau = tau.min(cap);
    }
    if !tau.is_finite() {
        return Err(MelError::Numerical("projected point has unbounded tau".into()));
    }
    Ok(SyncSolution { tau, d, source })
}
