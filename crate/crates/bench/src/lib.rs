//! Fixed-seed instances shared by the benchmarks.

use mel_core::instances::{random_problem, InstanceRanges};
use mel_core::{AllocationProblem, SystemParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n` random instances with exactly `k` learners.
pub fn instances(k: usize, n: usize, seed: u64) -> Vec<AllocationProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranges = InstanceRanges { learners: (k, k), ..InstanceRanges::default() };
    let sys = SystemParams::default();
    (0..n).map(|_| random_problem(&mut rng, &ranges, &sys)).collect()
}
