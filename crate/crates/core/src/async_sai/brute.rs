use super::Allocation;
use crate::error::{MelError, Result};
use crate::problem::AsyncProblem;

/// Largest number of batch vectors [`brute_force_small`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

fn binomial(n: u128, r: u128) -> u128 {
    let r = r.min(n.saturating_sub(r));
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Exact optimum for tiny instances.
///
/// Batches run over the `d_step` lattice above the floor (the last learner
/// takes the remainder). For a fixed batch vector the best update counts are
/// `tau_k = min(U_k, tau_max, m + c)`, where `U_k` is learner k's integer
/// update capacity and `m = min_k min(U_k, tau_max)`. Ties keep the
/// lexicographically first batch vector.
pub fn brute_force_small(prob: &AsyncProblem, tau_max: u64, d_step: u64) -> Result<Allocation> {
    prob.validate()?;
    let p = &prob.base;
    let k = p.num_learners();
    if k > 3 {
        return Err(MelError::InvalidInput(format!("brute force supports K <= 3, got {k}")));
    }
    if d_step == 0 {
        return Err(MelError::InvalidInput("d_step must be >= 1".into()));
    }
    let floor = p.batch_floor;
    let free = p.total_batch - floor * k as u64;
    let slots = (free / d_step) as u128;
    let points = binomial(slots + k as u128 - 1, k as u128 - 1);
    if points > BRUTE_FORCE_LIMIT {
        return Err(MelError::SearchTooLarge { points, limit: BRUTE_FORCE_LIMIT });
    }

    let mut best: Option<(u64, Vec<u64>, Vec<u64>)> = None;
    let mut d = vec![floor; k];
    let mut visit = |d: &[u64]| {
        let mut caps = Vec::with_capacity(k);
        for (i, &di) in d.iter().enumerate() {
            match p.integer_update_capacity(i, di) {
                Some(u) => caps.push(u.min(tau_max)),
                None => return,
            }
        }
        let m = caps.iter().copied().min().unwrap_or(0);
        let tau: Vec<u64> = caps.iter().map(|&u| u.min(m.saturating_add(prob.staleness_cap))).collect();
        let sum: u64 = tau.iter().sum();
        if best.as_ref().is_none_or(|b| sum > b.0) {
            best = Some((sum, tau, d.to_vec()));
        }
    };
    enumerate(&mut d, 0, free, d_step, floor, &mut visit);

    match best {
        Some((_, tau, d)) => Ok(Allocation::new(p, tau, d)),
        None => Err(MelError::Infeasible("no batch vector on the lattice fits".into())),
    }
}

fn enumerate(d: &mut Vec<u64>, pos: usize, left: u64, step: u64, floor: u64, visit: &mut impl FnMut(&[u64])) {
    if pos + 1 == d.len() {
        d[pos] = floor + left;
        visit(d);
        return;
    }
    let mut take = 0;
    while take <= left {
        d[pos] = floor + take;
        enumerate(d, pos + 1, left - take, step, floor, visit);
        take += step;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(200, 0), 1);
        assert_eq!(binomial(202, 2), 20301);
    }
}
