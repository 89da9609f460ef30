use super::Allocation;
use crate::error::{Budget, MelError, Result};
use crate::problem::AsyncProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HuMode {
    Sync,
    Async,
}

/// Heterogeneity-unaware baseline: equal batches, then the most updates each
/// learner can afford (common minimum for sync, clipped to `min + c` for async).
pub fn hu_equal_allocation(prob: &AsyncProblem, mode: HuMode) -> Result<Allocation> {
    prob.validate()?;
    let p = &prob.base;
    let k = p.num_learners() as u64;
    if p.total_batch < k {
        return Err(MelError::InvalidInput(format!("equal split needs d >= K ({} < {k})", p.total_batch)));
    }
    let share = p.total_batch / k;
    let extra = p.total_batch % k;
    let d: Vec<u64> = (0..k).map(|i| share + u64::from(i < extra)).collect();
    let mut tau = Vec::with_capacity(d.len());
    for (i, &di) in d.iter().enumerate() {
        let t = p.integer_update_capacity(i, di).ok_or_else(|| MelError::LearnerInfeasible {
            learner: i,
            budget: Budget::Batch,
            reason: format!("equal share of {di} samples does not fit even at tau = 0"),
        })?;
        tau.push(t);
    }
    let lo = tau.iter().copied().min().unwrap_or(0);
    if lo == u64::MAX {
        return Err(MelError::InvalidInput("every learner has an empty batch".into()));
    }
    let cap = match mode {
        HuMode::Sync => lo,
        HuMode::Async => lo.saturating_add(prob.staleness_cap),
    };
    for t in tau.iter_mut() {
        *t = (*t).min(cap);
    }
    Ok(Allocation::new(p, tau, d))
}
