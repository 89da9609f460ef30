//! Coordinate descent on the asynchronous relaxation.
//!
//! The batch sizes are eliminated: for update counts `tau` each learner can
//! hold at most `D_k(tau_k)` samples, so `tau` is feasible iff
//! `D_k(tau_k) >= d_lb` for all k, `sum_k D_k(tau_k) >= d`, and the spread of
//! `tau` is at most `c`. Batches are water-filled from the final capacities.
//! Moves per sweep:
//!
//! 1. shift every `tau_k` by the same amount;
//! 2. raise each `tau_k` alone, cheapest learner first (smallest `|D_k'|`);
//! 3. lower one learner and raise another, keeping the move only if the sum grows.
//!
//! Since `sum_k D_k` is convex in `tau`, the gain of a pairwise move is
//! quasi-convex in its length, so a handful of trial lengths including the
//! endpoint is enough.

use crate::error::{MelError, Result};
use crate::problem::{AllocationProblem, AsyncProblem};
use crate::sync_relax::{waterfill, SyncSolution};

pub const CD_TOLERANCE: f64 = 1e-6;
pub const CD_MAX_SWEEPS: usize = 200;
/// Stages run one by one up to this cap; a larger cap jumps straight to `c`.
const MAX_STAGED_CAP: u64 = 32;

/// Continuous update counts and batches.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousAllocation {
    pub tau: Vec<f64>,
    pub d: Vec<f64>,
}

impl ContinuousAllocation {
    pub fn objective(&self) -> f64 {
        self.tau.iter().sum::<f64>() / self.tau.len() as f64
    }

    pub fn staleness(&self) -> f64 {
        let hi = self.tau.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.tau.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

/// Output of [`improve_cd`]: one point per staleness stage `0, 1, ..., c`.
#[derive(Debug, Clone)]
pub struct CdRun {
    pub stages: Vec<ContinuousAllocation>,
    pub stage_caps: Vec<u64>,
    /// Mean `tau` after every sweep, across all stages.
    pub history: Vec<f64>,
}

impl CdRun {
    pub fn result(&self) -> &ContinuousAllocation {
        self.stages.last().expect("at least one stage")
    }

    pub fn objective(&self) -> f64 {
        self.result().objective()
    }

    pub fn sweeps(&self) -> usize {
        self.history.len()
    }
}

struct Reduced<'a> {
    prob: &'a AllocationProblem,
    cap: f64,
}

impl Reduced<'_> {
    fn k(&self) -> usize {
        self.prob.num_learners()
    }

    fn caps(&self, tau: &[f64]) -> Vec<f64> {
        tau.iter().enumerate().map(|(k, &t)| self.prob.capacity(k, t)).collect()
    }

    fn slope(&self, k: usize, tau: f64) -> f64 {
        let c = &self.prob.coeffs[k];
        let t = self.prob.deadline_s;
        let e = self.prob.energy_caps_j[k];
        let by_time = (t - c.c0) / (c.c2 * tau + c.c1);
        let by_energy = (e - c.g0) / (c.g2 * tau + c.g1);
        if by_time <= by_energy {
            (t - c.c0) * c.c2 / (c.c2 * tau + c.c1).powi(2)
        } else {
            (e - c.g0) * c.g2 / (c.g2 * tau + c.g1).powi(2)
        }
    }

    fn feasible(&self, tau: &[f64]) -> bool {
        let caps = self.caps(tau);
        let tol = 1e-9 * self.prob.total().max(1.0);
        if tau.iter().any(|&t| t < 0.0) || caps.iter().any(|&c| c < self.prob.floor() - tol) {
            return false;
        }
        if caps.iter().sum::<f64>() < self.prob.total() - tol {
            return false;
        }
        let hi = tau.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = tau.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo <= self.cap + 1e-9
    }

    /// Largest value learner `k` can move to with everyone else fixed.
    fn raise_limit(&self, tau: &[f64], k: usize) -> f64 {
        let stale = tau
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != k)
            .map(|(_, &t)| t + self.cap)
            .fold(f64::INFINITY, f64::min);
        let others: f64 = tau
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != k)
            .map(|(l, &t)| self.prob.capacity(l, t))
            .sum();
        let need = self.prob.floor().max(self.prob.total() - others);
        let budget = if need > 0.0 { self.prob.update_capacity(k, need) } else { f64::INFINITY };
        // Shave a relative ulp-scale margin so the sum constraint is not crossed by rounding.
        let budget = if budget.is_finite() { budget * (1.0 - 1e-12) } else { budget };
        let limit = stale.min(budget);
        if limit.is_finite() {
            limit
        } else {
            tau[k]
        }
    }

    fn common_shift(&self, tau: &mut [f64]) {
        let shifted = |delta: f64| -> Vec<f64> { tau.iter().map(|t| t + delta).collect() };
        if !self.feasible(&shifted(0.0)) {
            return;
        }
        let mut lo = 0.0;
        let mut hi = 1.0f64.max(tau.iter().cloned().fold(0.0, f64::max));
        let mut guard = 0;
        while self.feasible(&shifted(hi)) {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 100 {
                return;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi.max(1.0) {
                break;
            }
            if self.feasible(&shifted(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for t in tau.iter_mut() {
            *t += lo;
        }
    }

    fn raise_all(&self, tau: &mut [f64]) {
        let mut order: Vec<usize> = (0..self.k()).collect();
        let slopes: Vec<f64> = order.iter().map(|&k| self.slope(k, tau[k])).collect();
        order.sort_by(|&a, &b| slopes[a].total_cmp(&slopes[b]).then(a.cmp(&b)));
        for k in order {
            let limit = self.raise_limit(tau, k);
            if limit > tau[k] {
                let old = tau[k];
                tau[k] = limit;
                if !self.feasible(tau) {
                    tau[k] = old;
                }
            }
        }
    }

    /// Net gain of lowering `i` by `a` and then raising `j` as far as possible.
    fn exchange(&self, tau: &[f64], i: usize, j: usize, a: f64) -> Option<(f64, Vec<f64>)> {
        let mut t = tau.to_vec();
        t[i] -= a;
        let limit = self.raise_limit(&t, j);
        if limit <= t[j] {
            return None;
        }
        t[j] = limit;
        if !self.feasible(&t) {
            return None;
        }
        Some((t[j] - tau[j] - a, t))
    }

    fn exchanges(&self, tau: &mut Vec<f64>) {
        let k = self.k();
        if k < 2 {
            return;
        }
        let slopes: Vec<f64> = (0..k).map(|l| self.slope(l, tau[l])).collect();
        let mut expensive: Vec<usize> = (0..k).collect();
        expensive.sort_by(|&a, &b| slopes[b].total_cmp(&slopes[a]).then(a.cmp(&b)));
        let mut cheap = expensive.clone();
        cheap.reverse();
        for &i in &expensive {
            for &j in &cheap {
                if i == j {
                    continue;
                }
                let rest_max = (0..k)
                    .filter(|&l| l != i && l != j)
                    .map(|l| tau[l])
                    .fold(f64::NEG_INFINITY, f64::max);
                let a_max = tau[i].min(tau[i] - (rest_max - self.cap)).max(0.0);
                if a_max <= 0.0 {
                    continue;
                }
                let rest_min = (0..k)
                    .filter(|&l| l != i && l != j)
                    .map(|l| tau[l])
                    .fold(f64::INFINITY, f64::min);
                let mut trials: Vec<f64> = (1..=8).map(|s| a_max * s as f64 / 8.0).collect();
                let kink = tau[i] - rest_min;
                if kink > 0.0 && kink < a_max {
                    trials.push(kink);
                }
                let mut best: Option<(f64, Vec<f64>)> = None;
                for a in trials {
                    if let Some((gain, t)) = self.exchange(tau, i, j, a) {
                        if best.as_ref().is_none_or(|b| gain > b.0) {
                            best = Some((gain, t));
                        }
                    }
                }
                if let Some((gain, t)) = best {
                    if gain > 1e-10 * (1.0 + tau[j].abs()) {
                        *tau = t;
                    }
                }
            }
        }
    }

    fn run(&self, tau: &mut Vec<f64>, history: &mut Vec<f64>) -> Result<()> {
        let k = self.k() as f64;
        for _ in 0..CD_MAX_SWEEPS {
            let before: f64 = tau.iter().sum::<f64>() / k;
            self.common_shift(tau);
            self.raise_all(tau);
            self.exchanges(tau);
            let after: f64 = tau.iter().sum::<f64>() / k;
            if after < before - 1e-9 * before.abs().max(1.0) {
                return Err(MelError::Numerical(format!("sweep decreased the objective: {before} -> {after}")));
            }
            history.push(after);
            if after - before < CD_TOLERANCE * before.abs().max(1.0) {
                break;
            }
        }
        Ok(())
    }
}

/// Improves a synchronous point under the staleness cap `c`.
///
/// The cap is relaxed in stages `0, 1, ..., c`, each starting from the
/// previous stage's point, so the objective is non-decreasing in `c`.
pub fn improve_cd(init: &SyncSolution, prob: &AsyncProblem) -> Result<CdRun> {
    prob.validate()?;
    let base = &prob.base;
    let k = base.num_learners();
    if init.d.len() != k || !(init.tau.is_finite() && init.tau >= 0.0) {
        return Err(MelError::Contract("improve step needs a synchronous point of matching size".into()));
    }
    let mut tau = vec![init.tau; k];
    let start = Reduced { prob: base, cap: 0.0 };
    if !start.feasible(&tau) {
        return Err(MelError::Contract(format!(
            "improve step started from an infeasible synchronous point (tau = {})",
            init.tau
        )));
    }

    let mut caps: Vec<u64> = (0..=prob.staleness_cap.min(MAX_STAGED_CAP)).collect();
    if prob.staleness_cap > MAX_STAGED_CAP {
        caps.push(prob.staleness_cap);
    }
    let mut stages = Vec::with_capacity(caps.len());
    let mut history = Vec::new();
    for &cap in &caps {
        let r = Reduced { prob: base, cap: cap as f64 };
        r.run(&mut tau, &mut history)?;
        let d = waterfill(&r.caps(&tau), base.floor(), base.total());
        stages.push(ContinuousAllocation { tau: tau.clone(), d });
    }
    Ok(CdRun { stages, stage_caps: caps, history })
}
