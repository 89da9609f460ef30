use super::{cd::ContinuousAllocation, staleness, Allocation};
use crate::error::{Budget, MelError, Result};
use crate::problem::{AllocationProblem, AsyncProblem};
use crate::sync_relax::tau_upper_bound;

/// Integer batches `clamp(L, floor, cap_k)` at the smallest level `L` that
/// reaches `total`; the overshoot is taken back from learners sitting at the
/// level, lowest index first. `None` if the caps cannot hold `total`.
pub fn integer_waterfill(caps: &[u64], floor: u64, total: u64) -> Option<Vec<u64>> {
    if caps.iter().any(|&c| c < floor) {
        return None;
    }
    let fill = |level: u64| -> u64 { caps.iter().map(|&c| level.max(floor).min(c)).sum() };
    let top = caps.iter().copied().max().unwrap_or(0);
    if fill(top) < total {
        return None;
    }
    let (mut lo, mut hi) = (floor, top);
    if fill(lo) >= total {
        hi = lo;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fill(mid) >= total {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let level = hi;
    let mut d: Vec<u64> = caps.iter().map(|&c| level.max(floor).min(c)).collect();
    let mut excess = d.iter().sum::<u64>() - total;
    for (i, di) in d.iter_mut().enumerate() {
        if excess == 0 {
            break;
        }
        if *di == level && level > floor && caps[i] >= level {
            *di -= 1;
            excess -= 1;
        }
    }
    if excess > 0 {
        return None;
    }
    Some(d)
}

fn int_caps(prob: &AllocationProblem, tau: &[u64]) -> Option<Vec<u64>> {
    tau.iter().enumerate().map(|(k, &t)| prob.integer_capacity(k, t)).collect()
}

fn place(prob: &AllocationProblem, tau: &[u64]) -> Option<Vec<u64>> {
    let caps = int_caps(prob, tau)?;
    integer_waterfill(&caps, prob.batch_floor, prob.total_batch)
}

/// Best synchronous integer allocation: the largest common `tau` at which the
/// integer capacities can hold `d`.
pub fn integer_sync(prob: &AllocationProblem) -> Result<Allocation> {
    prob.validate()?;
    let k = prob.num_learners();
    let at = |t: u64| place(prob, &vec![t; k]);
    if at(0).is_none() {
        if let Some(i) = (0..k).find(|&i| prob.integer_capacity(i, 0).is_none_or(|c| c < prob.batch_floor)) {
            return Err(MelError::LearnerInfeasible {
                learner: i,
                budget: Budget::Batch,
                reason: format!("cannot hold the batch floor {} even at tau = 0", prob.batch_floor),
            });
        }
        return Err(MelError::Infeasible(format!(
            "learners cannot hold d = {} samples even at tau = 0",
            prob.total_batch
        )));
    }
    let ub = tau_upper_bound(prob);
    let mut hi = if ub.is_finite() && ub >= 0.0 { ub.floor() as u64 + 1 } else { 1 };
    while at(hi).is_some() {
        hi = hi.saturating_mul(2);
        if hi == u64::MAX {
            return Err(MelError::Numerical("synchronous integer optimum is unbounded".into()));
        }
    }
    let mut lo = 0;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if at(mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = vec![lo; k];
    let d = at(lo).expect("lo is feasible");
    Ok(Allocation::new(prob, tau, d))
}

fn clip_staleness(tau: &mut [u64], cap: u64) {
    let lo = tau.iter().copied().min().unwrap_or(0);
    for t in tau.iter_mut() {
        *t = (*t).min(lo.saturating_add(cap));
    }
}

/// Floors a continuous allocation and restores `sum d_k = d`.
///
/// Samples are added one at a time to the learner with the most integer
/// headroom at its current `tau`. When nobody has headroom, the largest `tau`
/// is decremented (then everything is clipped back under the staleness cap).
pub fn floor_and_repair(cont: &ContinuousAllocation, prob: &AsyncProblem) -> Result<Allocation> {
    let p = &prob.base;
    let k = p.num_learners();
    if cont.tau.len() != k || cont.d.len() != k {
        return Err(MelError::Contract("continuous allocation does not match the learner count".into()));
    }
    let floor = p.batch_floor;
    let mut tau: Vec<u64> = cont.tau.iter().map(|&t| if t.is_finite() && t > 0.0 { t.floor() as u64 } else { 0 }).collect();
    let mut d: Vec<u64> = cont.d.iter().map(|&v| if v.is_finite() && v > 0.0 { v.floor() as u64 } else { 0 }).collect();
    clip_staleness(&mut tau, prob.staleness_cap);

    // Per-learner fit: shrink the batch to the integer capacity, and tau
    // until the floor fits.
    for i in 0..k {
        loop {
            let cap = p.integer_capacity(i, tau[i]).unwrap_or(0);
            if cap >= floor || tau[i] == 0 {
                d[i] = d[i].min(cap).max(floor);
                break;
            }
            tau[i] -= 1;
        }
        if !p.fits(i, tau[i], d[i]) {
            return Err(MelError::LearnerInfeasible {
                learner: i,
                budget: Budget::Batch,
                reason: format!("cannot hold the batch floor {floor} even at tau = 0"),
            });
        }
    }
    clip_staleness(&mut tau, prob.staleness_cap);

    let total = p.total_batch;
    let mut caps = int_caps(p, &tau).ok_or_else(|| MelError::Infeasible("model exchange does not fit".into()))?;
    loop {
        let sum: u64 = d.iter().sum();
        if sum == total {
            break;
        }
        if sum > total {
            // Only reachable when raising to the floor overshot; trim the fattest batch.
            let i = (0..k).max_by_key(|&i| (d[i] - floor, std::cmp::Reverse(i))).expect("k >= 1");
            if d[i] == floor {
                return Err(MelError::Infeasible("batch floors exceed the total batch".into()));
            }
            d[i] -= 1;
            continue;
        }
        let best = (0..k)
            .filter(|&i| caps[i] > d[i])
            .max_by_key(|&i| (caps[i] - d[i], std::cmp::Reverse(i)));
        match best {
            Some(i) => d[i] += 1,
            None => {
                let i = (0..k).max_by_key(|&i| (tau[i], std::cmp::Reverse(i))).expect("k >= 1");
                if tau[i] == 0 {
                    return Err(MelError::Infeasible(format!(
                        "cannot place {} samples even with tau = 0",
                        total
                    )));
                }
                tau[i] -= 1;
                clip_staleness(&mut tau, prob.staleness_cap);
                caps = int_caps(p, &tau).ok_or_else(|| MelError::Infeasible("model exchange does not fit".into()))?;
            }
        }
    }
    debug_assert!(staleness(&tau) <= prob.staleness_cap);
    Ok(Allocation::new(p, tau, d))
}

/// Greedy integer ascent: add one update to everybody, or to a single learner
/// (smallest `tau` first), whenever the integer capacities still hold `d`.
/// Batches are re-placed by integer water-filling.
pub fn polish(alloc: &Allocation, prob: &AsyncProblem) -> Allocation {
    let p = &prob.base;
    let k = p.num_learners();
    let mut tau = alloc.tau.clone();
    clip_staleness(&mut tau, prob.staleness_cap);
    let mut d = match place(p, &tau) {
        Some(d) => d,
        None => return alloc.clone(),
    };
    loop {
        let all: Vec<u64> = tau.iter().map(|t| t + 1).collect();
        if let Some(nd) = place(p, &all) {
            tau = all;
            d = nd;
            continue;
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&i| (tau[i], i));
        let mut moved = false;
        for i in order {
            let mut trial = tau.clone();
            trial[i] += 1;
            if staleness(&trial) > prob.staleness_cap {
                continue;
            }
            if let Some(nd) = place(p, &trial) {
                tau = trial;
                d = nd;
                moved = true;
                break;
            }
        }
        if !moved {
            break;
        }
    }
    let out = Allocation::new(p, tau, d);
    if out.objective >= alloc.objective {
        out
    } else {
        alloc.clone()
    }
}
