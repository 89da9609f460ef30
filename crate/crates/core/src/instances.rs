//! Random learner populations and allocation instances with the reference
//! radio setup (5 MHz, 23 dBm, cell radius 500 m, four processor classes).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost_model::{dbm_to_watts, path_loss_gain, LearnerProfile, SystemParams};
use crate::problem::AllocationProblem;

/// Processor classes in Hz: laptop, phone, single-board computer, microcontroller.
pub const FREQ_CLASSES_HZ: [f64; 4] = [6.0e9, 2.4e9, 1.4e9, 0.7e9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationSpec {
    pub freq_classes_hz: Vec<f64>,
    /// Relative weights of the classes; uniform when empty.
    pub class_weights: Vec<f64>,
    pub max_distance_m: f64,
    pub tx_power_dbm: f64,
    /// Mean energy cap E in joules.
    pub mean_energy_j: f64,
    /// Jitter sigma: caps are `E +/- sigma * U`.
    pub energy_jitter_j: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            freq_classes_hz: FREQ_CLASSES_HZ.to_vec(),
            class_weights: Vec::new(),
            max_distance_m: 500.0,
            tx_power_dbm: 23.0,
            mean_energy_j: 20.0,
            energy_jitter_j: 2.5,
        }
    }
}

fn pick_class<R: Rng + ?Sized>(rng: &mut R, spec: &PopulationSpec) -> f64 {
    let n = spec.freq_classes_hz.len();
    if spec.class_weights.len() != n || spec.class_weights.iter().sum::<f64>() <= 0.0 {
        return spec.freq_classes_hz[rng.random_range(0..n)];
    }
    let total: f64 = spec.class_weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (f, w) in spec.freq_classes_hz.iter().zip(&spec.class_weights) {
        if u < *w {
            return *f;
        }
        u -= w;
    }
    spec.freq_classes_hz[n - 1]
}

/// Draws `k` learners. Per learner, in order: distance in `(0, R]`, processor
/// class, jitter magnitude `U`, jitter sign.
pub fn draw_profiles<R: Rng + ?Sized>(rng: &mut R, k: usize, spec: &PopulationSpec) -> Vec<LearnerProfile> {
    let tx = dbm_to_watts(spec.tx_power_dbm);
    (0..k)
        .map(|id| {
            // 1 - U lies in (0, 1], so the distance is never zero.
            let distance = spec.max_distance_m * (1.0 - rng.random::<f64>());
            let freq = pick_class(rng, spec);
            let u: f64 = rng.random();
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            LearnerProfile {
                id,
                cpu_freq_hz: freq,
                tx_power_w: tx,
                channel_gain: path_loss_gain(distance).expect("distance is positive"),
                energy_cap_j: spec.mean_energy_j + sign * spec.energy_jitter_j * u,
            }
        })
        .collect()
}

/// Ranges for [`random_problem`].
#[derive(Debug, Clone)]
pub struct InstanceRanges {
    pub learners: (usize, usize),
    pub deadline_s: (f64, f64),
    pub mean_energy_j: (f64, f64),
    /// Total batch as a fraction of what the population can absorb at one update.
    pub load: (f64, f64),
    pub max_total_batch: u64,
    pub max_floor: u64,
}

impl Default for InstanceRanges {
    fn default() -> Self {
        Self {
            learners: (2, 20),
            deadline_s: (5.0, 40.0),
            mean_energy_j: (10.0, 30.0),
            load: (0.2, 0.8),
            max_total_batch: 60_000,
            max_floor: 10,
        }
    }
}

/// A random instance that is feasible at one update per learner.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, ranges: &InstanceRanges, sys: &SystemParams) -> AllocationProblem {
    let k = rng.random_range(ranges.learners.0..=ranges.learners.1);
    let deadline = rng.random_range(ranges.deadline_s.0..=ranges.deadline_s.1);
    let pop = PopulationSpec {
        mean_energy_j: rng.random_range(ranges.mean_energy_j.0..=ranges.mean_energy_j.1),
        ..PopulationSpec::default()
    };
    let profiles = draw_profiles(rng, k, &pop);
    let mut prob = AllocationProblem::from_profiles(&profiles, sys, deadline, 1, 0);
    let absorb: f64 = (0..k).map(|i| prob.capacity(i, 1.0).max(0.0).floor()).sum();
    let load = rng.random_range(ranges.load.0..=ranges.load.1);
    let total = ((absorb * load).floor() as u64).clamp(k as u64, ranges.max_total_batch.max(k as u64));
    let floor_cap = ranges.max_floor.min(total / (2 * k as u64));
    prob.total_batch = total;
    prob.batch_floor = rng.random_range(0..=floor_cap);
    prob
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_jitter_means_equal_caps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = PopulationSpec { energy_jitter_j: 0.0, ..Default::default() };
        for p in draw_profiles(&mut rng, 30, &spec) {
            assert_eq!(p.energy_cap_j, 20.0);
            assert!(FREQ_CLASSES_HZ.contains(&p.cpu_freq_hz));
        }
    }

    #[test]
    fn same_seed_same_population() {
        let spec = PopulationSpec::default();
        let a = draw_profiles(&mut ChaCha8Rng::seed_from_u64(9), 12, &spec);
        let b = draw_profiles(&mut ChaCha8Rng::seed_from_u64(9), 12, &spec);
        assert_eq!(a, b);
    }

    #[test]
    fn random_problems_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sys = SystemParams::default();
        for _ in 0..50 {
            let p = random_problem(&mut rng, &InstanceRanges::default(), &sys);
            p.validate().unwrap();
            assert!(p.total_batch >= p.num_learners() as u64 * p.batch_floor);
        }
    }
}
