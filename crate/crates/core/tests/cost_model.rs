use mel_core::cost_model::{dbm_to_watts, path_loss_gain, phase_costs, TransferMode};
use mel_core::{CostCoeffs, LearnerProfile, SystemParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Cycle time and energy straight from the physical quantities, phase by phase.
fn expanded_costs(distance_m: f64, freq_hz: f64, p_dbm: f64, sys: &SystemParams, tau: f64, d: f64) -> (f64, f64) {
    let p = 10f64.powf((p_dbm - 30.0) / 10.0);
    let pl_db = 128.0 + 37.1 * (distance_m / 1000.0).log10();
    let h = 10f64.powf(-pl_db / 10.0);
    let rate = sys.bandwidth_hz * (1.0 + p * h / (sys.noise_density_w_per_hz * sys.bandwidth_hz)).log2();
    let model_bits = sys.precision_model_bits * (d * sys.data_model_factor + sys.model_size);
    let data_bits = match sys.transfer_mode {
        TransferMode::Parallelized => d * sys.feature_count * sys.precision_data_bits,
        TransferMode::Federated => 0.0,
    };
    let download = (model_bits + data_bits) / rate;
    let compute = tau * d * sys.model_complexity / freq_hz;
    let upload = model_bits / rate;
    let f_unit = freq_hz / sys.energy_freq_unit_hz;
    let e_compute = tau * sys.chip_capacitance * d * sys.model_complexity * f_unit.powf(sys.compute_exponent - 1.0);
    let e_upload = p * upload;
    (download + compute + upload, e_compute + e_upload)
}

#[test]
fn compact_matches_expanded_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let classes = [6.0e9, 2.4e9, 1.4e9, 0.7e9];
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let mut sys = SystemParams::default();
        if i % 3 == 1 {
            sys.transfer_mode = TransferMode::Federated;
        }
        if i % 5 == 2 {
            sys.data_model_factor = rng.random_range(0.0..4.0);
        }
        let distance = rng.random_range(1.0..500.0);
        let freq = classes[rng.random_range(0..4)];
        let p_dbm = rng.random_range(10.0..30.0);
        let tau = rng.random_range(0..200) as f64;
        let d = rng.random_range(0..5000) as f64;
        let profile = LearnerProfile {
            id: 0,
            cpu_freq_hz: freq,
            tx_power_w: dbm_to_watts(p_dbm),
            channel_gain: path_loss_gain(distance).unwrap(),
            energy_cap_j: 10.0,
        };
        let c = CostCoeffs::from_profile(&profile, &sys);
        let (t_ref, e_ref) = expanded_costs(distance, freq, p_dbm, &sys, tau, d);
        worst = worst.max(rel(c.predict_time(tau, d), t_ref)).max(rel(c.predict_energy(tau, d), e_ref));
        let ph = phase_costs(&profile, &sys, d);
        worst = worst.max(rel(ph.total_time(tau), t_ref)).max(rel(ph.total_energy(tau), e_ref));
    }
    assert!(worst <= 1e-12, "worst relative mismatch {worst:e}");
}

#[test]
fn federated_mode_is_faster_for_the_same_allocation() {
    let profile = LearnerProfile {
        id: 0,
        cpu_freq_hz: 1.4e9,
        tx_power_w: dbm_to_watts(23.0),
        channel_gain: path_loss_gain(300.0).unwrap(),
        energy_cap_j: 20.0,
    };
    let pl = SystemParams::default();
    let fl = SystemParams { transfer_mode: TransferMode::Federated, ..pl.clone() };
    for (tau, d) in [(1.0, 1.0), (10.0, 100.0), (3.0, 2000.0)] {
        let t_pl = CostCoeffs::from_profile(&profile, &pl).predict_time(tau, d);
        let t_fl = CostCoeffs::from_profile(&profile, &fl).predict_time(tau, d);
        assert!(t_fl < t_pl);
    }
}

#[test]
fn invalid_system_params_rejected() {
    let bad = SystemParams { bandwidth_hz: 0.0, ..SystemParams::default() };
    assert!(bad.validate().is_err());
    let bad = SystemParams { compute_exponent: 0.5, ..SystemParams::default() };
    assert!(bad.validate().is_err());
    assert!(SystemParams::default().validate().is_ok());
}

proptest! {
    #[test]
    fn costs_monotone_in_work(
        dist in 1.0f64..500.0,
        class in 0usize..4,
        tau in 0u32..100,
        d in 0u32..3000,
    ) {
        let freq = [6.0e9, 2.4e9, 1.4e9, 0.7e9][class];
        let profile = LearnerProfile {
            id: 0,
            cpu_freq_hz: freq,
            tx_power_w: dbm_to_watts(23.0),
            channel_gain: path_loss_gain(dist).unwrap(),
            energy_cap_j: 10.0,
        };
        let c = CostCoeffs::from_profile(&profile, &SystemParams::default());
        let (tau, d) = (tau as f64, d as f64);
        prop_assert!(c.predict_time(tau + 1.0, d) >= c.predict_time(tau, d));
        prop_assert!(c.predict_time(tau, d + 1.0) > c.predict_time(tau, d));
        prop_assert!(c.predict_energy(tau + 1.0, d) >= c.predict_energy(tau, d));
        prop_assert!(c.predict_energy(tau, d + 1.0) >= c.predict_energy(tau, d));
    }

    #[test]
    fn capacity_is_the_budget_boundary(
        dist in 1.0f64..500.0,
        tau in 0.0f64..50.0,
        t_max in 5.0f64..40.0,
        e_max in 5.0f64..30.0,
    ) {
        let profile = LearnerProfile {
            id: 0,
            cpu_freq_hz: 2.4e9,
            tx_power_w: dbm_to_watts(23.0),
            channel_gain: path_loss_gain(dist).unwrap(),
            energy_cap_j: e_max,
        };
        let c = CostCoeffs::from_profile(&profile, &SystemParams::default());
        let cap = c.max_batch(tau, t_max, e_max);
        prop_assume!(cap > 0.0 && cap.is_finite());
        let t = c.predict_time(tau, cap);
        let e = c.predict_energy(tau, cap);
        prop_assert!(t <= t_max * (1.0 + 1e-12) && e <= e_max * (1.0 + 1e-12));
        prop_assert!(rel(t, t_max) < 1e-9 || rel(e, e_max) < 1e-9);
    }
}
