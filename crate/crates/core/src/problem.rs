use serde::{Deserialize, Serialize};

use crate::cost_model::{CostCoeffs, LearnerProfile, SystemParams};
use crate::error::{Budget, MelError, Result};

/// One allocation instance: per-learner cost coefficients plus the cycle budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub coeffs: Vec<CostCoeffs>,
    /// Global cycle deadline T in seconds.
    pub deadline_s: f64,
    /// Per-learner energy caps in joules.
    pub energy_caps_j: Vec<f64>,
    /// Total samples d that must be allocated each cycle.
    pub total_batch: u64,
    /// Minimum samples per learner.
    pub batch_floor: u64,
}

impl AllocationProblem {
    pub fn from_profiles(
        profiles: &[LearnerProfile],
        sys: &SystemParams,
        deadline_s: f64,
        total_batch: u64,
        batch_floor: u64,
    ) -> Self {
        Self {
            coeffs: profiles.iter().map(|p| CostCoeffs::from_profile(p, sys)).collect(),
            deadline_s,
            energy_caps_j: profiles.iter().map(|p| p.energy_cap_j).collect(),
            total_batch,
            batch_floor,
        }
    }

    pub fn num_learners(&self) -> usize {
        self.coeffs.len()
    }

    pub fn total(&self) -> f64 {
        self.total_batch as f64
    }

    pub fn floor(&self) -> f64 {
        self.batch_floor as f64
    }

    /// Structural checks plus "fixed overhead fits the budget" for every learner.
    pub fn validate(&self) -> Result<()> {
        let k = self.num_learners();
        if k == 0 {
            return Err(MelError::InvalidInput("at least one learner is required".into()));
        }
        if self.energy_caps_j.len() != k {
            return Err(MelError::InvalidInput("energy caps must match learner count".into()));
        }
        if !(self.deadline_s.is_finite() && self.deadline_s > 0.0) {
            return Err(MelError::InvalidInput(format!("deadline must be > 0, got {}", self.deadline_s)));
        }
        if self.total_batch == 0 {
            return Err(MelError::InvalidInput("total batch must be >= 1".into()));
        }
        if (k as u64).saturating_mul(self.batch_floor) > self.total_batch {
            return Err(MelError::Infeasible(format!(
                "batch floor {} for {} learners exceeds total batch {}",
                self.batch_floor, k, self.total_batch
            )));
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            let vals = [c.c2, c.c1, c.c0, c.g2, c.g1, c.g0];
            if vals.iter().any(|v| !v.is_finite() || *v < 0.0) || c.c2 <= 0.0 || c.g2 <= 0.0 {
                return Err(MelError::InvalidInput(format!("learner {i}: invalid cost coefficients")));
            }
            if c.c0 >= self.deadline_s {
                return Err(MelError::LearnerInfeasible {
                    learner: i,
                    budget: Budget::Time,
                    reason: format!("model exchange alone takes {:.4} s >= T = {}", c.c0, self.deadline_s),
                });
            }
            if c.g0 >= self.energy_caps_j[i] {
                return Err(MelError::LearnerInfeasible {
                    learner: i,
                    budget: Budget::Energy,
                    reason: format!(
                        "model upload alone costs {:.4} J >= cap {}",
                        c.g0, self.energy_caps_j[i]
                    ),
                });
            }
        }
        Ok(())
    }

    /// Continuous batch capacity of learner `k` at `tau` updates.
    pub fn capacity(&self, k: usize, tau: f64) -> f64 {
        self.coeffs[k].max_batch(tau, self.deadline_s, self.energy_caps_j[k])
    }

    /// Continuous update capacity of learner `k` with batch `d`.
    pub fn update_capacity(&self, k: usize, d: f64) -> f64 {
        self.coeffs[k].max_updates(d, self.deadline_s, self.energy_caps_j[k])
    }

    /// Largest integer batch for learner `k` at integer `tau`, checked against the
    /// exact budget predicates. `None` if not even an empty batch fits.
    pub fn integer_capacity(&self, k: usize, tau: u64) -> Option<u64> {
        let fits = |d: u64| self.fits(k, tau, d);
        if !fits(0) {
            return None;
        }
        let guess = self.capacity(k, tau as f64);
        let cap_limit = self.total_batch;
        let mut x = if guess.is_finite() { guess.floor().clamp(0.0, cap_limit as f64) as u64 } else { cap_limit };
        while x > 0 && !fits(x) {
            x -= 1;
        }
        while x < cap_limit && fits(x + 1) {
            x += 1;
        }
        Some(x)
    }

    /// Largest integer update count for learner `k` with integer batch `d`.
    /// `None` if not even `tau = 0` fits; `u64::MAX` if unbounded (empty batch).
    pub fn integer_update_capacity(&self, k: usize, d: u64) -> Option<u64> {
        if !self.fits(k, 0, d) {
            return None;
        }
        let guess = self.update_capacity(k, d as f64);
        if !guess.is_finite() {
            return Some(u64::MAX);
        }
        let mut x = guess.floor().max(0.0) as u64;
        while x > 0 && !self.fits(k, x, d) {
            x -= 1;
        }
        while self.fits(k, x + 1, d) {
            x += 1;
        }
        Some(x)
    }

    /// Exact budget predicate used by every validator.
    pub fn fits(&self, k: usize, tau: u64, d: u64) -> bool {
        let c = &self.coeffs[k];
        c.predict_time(tau as f64, d as f64) <= self.deadline_s
            && c.predict_energy(tau as f64, d as f64) <= self.energy_caps_j[k]
    }
}

/// Allocation problem with a cap on pairwise update-count differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsyncProblem {
    pub base: AllocationProblem,
    pub staleness_cap: u64,
}

impl AsyncProblem {
    pub fn new(base: AllocationProblem, staleness_cap: u64) -> Self {
        Self { base, staleness_cap }
    }

    /// Largest staleness cap accepted; beyond it the cap is effectively absent.
    pub const MAX_STALENESS: u64 = 1_000_000;

    pub fn validate(&self) -> Result<()> {
        if self.staleness_cap > Self::MAX_STALENESS {
            return Err(MelError::InvalidInput(format!(
                "staleness cap {} exceeds {}",
                self.staleness_cap,
                Self::MAX_STALENESS
            )));
        }
        self.base.validate()
    }
}
