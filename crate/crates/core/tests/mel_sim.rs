use mel_core::cost_model::phase_costs;
use mel_core::learn_core::{DatasetKind, DatasetSpec};
use mel_core::mel_sim::{aggregate_models, generate_learners, run_experiment, BackendKind, ScenarioSpec, Simulator, StopReason};
use mel_core::{CostCoeffs, MelError, Scheme, SystemParams, TransferMode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small-τ calibration: a heavy per-sample load keeps local updates in single digits.
fn desk(k: usize, t: f64, e: f64, d: u64) -> ScenarioSpec {
    let mut s = ScenarioSpec::new(k, t, e, d);
    s.system = SystemParams { model_complexity: 80_909_000.0, ..SystemParams::default() };
    s.dataset = DatasetSpec { separation: 0.5, ..DatasetSpec::default() };
    s.learning_rate = 0.05;
    s.staleness = 2;
    s.seed = 7;
    s
}

fn tiny_linear() -> ScenarioSpec {
    let mut s = ScenarioSpec::new(3, 10.0, 10.0, 120);
    s.backend = BackendKind::Linear;
    s.dataset = DatasetSpec { kind: DatasetKind::Regression, features: 4, ..DatasetSpec::default() };
    s.system = SystemParams { model_complexity: 80_909_000.0, ..SystemParams::default() };
    s.learning_rate = 0.01;
    s.use_sdp = false;
    s.cycles = 4;
    s
}

#[test]
fn aggregation_matches_elementwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let models: Vec<Vec<f64>> = (0..4).map(|_| (0..7).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let d = [3u64, 0, 10, 7];
    let got = aggregate_models(&models, &d).unwrap();
    for j in 0..7 {
        let want = (3.0 * models[0][j] + 10.0 * models[2][j] + 7.0 * models[3][j]) / 20.0;
        assert!((got[j] - want).abs() < 1e-14);
    }
    // Weights are normalised: equal models come back unchanged.
    let same = vec![vec![1.5, -2.0]; 3];
    assert_eq!(aggregate_models(&same, &[5, 9, 1]).unwrap(), vec![1.5, -2.0]);
    assert!(matches!(aggregate_models(&models, &[1, 2]), Err(MelError::Contract(_))));
    assert!(aggregate_models(&models, &[0, 0, 0, 0]).is_err());
}

#[test]
fn learner_generation() {
    let mut spec = ScenarioSpec::new(20, 10.0, 12.0, 1000);
    spec.energy_jitter_j = 0.0;
    assert!(generate_learners(&spec, 3).iter().all(|p| p.energy_cap_j == 12.0));

    spec.energy_jitter_j = 3.0;
    let seeds = 100;
    let mean: f64 = (0..seeds)
        .map(|s| generate_learners(&spec, s).iter().map(|p| p.energy_cap_j).sum::<f64>() / 20.0)
        .sum::<f64>()
        / seeds as f64;
    assert!((mean - 12.0).abs() <= 1.5, "mean cap {mean}");
    for s in 0..seeds {
        for p in generate_learners(&spec, s) {
            assert!((p.energy_cap_j - 12.0).abs() <= 3.0);
            assert!(spec.freq_classes_hz.contains(&p.cpu_freq_hz));
            assert!(p.channel_gain > 0.0 && p.channel_gain.is_finite());
        }
    }
    assert_eq!(generate_learners(&spec, 42), generate_learners(&spec, 42));
    assert_ne!(generate_learners(&spec, 42), generate_learners(&spec, 43));
}

#[test]
fn traces_are_deterministic() {
    let spec = tiny_linear();
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    assert_eq!(a, b);
    let mut other = spec.clone();
    other.seed = 1;
    assert_ne!(a, run_experiment(&other).unwrap());
}

#[test]
fn charged_costs_follow_the_compact_model() {
    let spec = desk(8, 15.0, 12.0, 600);
    let trace = run_experiment(&ScenarioSpec { cycles: 3, ..spec.clone() }).unwrap();
    assert!(trace.failure.is_none());
    for ledger in &trace.ledgers {
        for (l, p) in ledger.learners.iter().zip(&trace.profiles) {
            let c = CostCoeffs::from_profile(p, &spec.system);
            let (tau, d) = (l.tau as f64, l.d as f64);
            let t = c.c2 * tau * d + c.c1 * d + c.c0;
            let e = c.g2 * tau * d + c.g1 * d + c.g0;
            assert!((l.time_s - t).abs() <= 1e-9 * t);
            assert!((l.energy_j - e).abs() <= 1e-9 * e);
        }
    }
}

#[test]
fn federated_cycles_are_cheaper() {
    let pl = desk(10, 10.0, 10.0, 800);
    let fl = ScenarioSpec { system: SystemParams { transfer_mode: TransferMode::Federated, ..pl.system.clone() }, ..pl.clone() };
    let pl_trace = run_experiment(&ScenarioSpec { cycles: 1, ..pl.clone() }).unwrap();
    let fl_trace = run_experiment(&ScenarioSpec { cycles: 1, ..fl.clone() }).unwrap();
    let ledger = &pl_trace.ledgers[0];
    for (l, p) in ledger.learners.iter().zip(&pl_trace.profiles) {
        let fl_time = phase_costs(p, &fl.system, l.d as f64).total_time(l.tau as f64);
        assert!(fl_time < l.time_s);
    }
    assert!(fl_trace.ledgers[0].objective >= ledger.objective);
}

#[test]
fn twelve_cycles_keep_every_invariant() {
    for scheme in Scheme::ALL {
        let mut spec = desk(20, 20.0, 20.0, 1000);
        spec.scheme = scheme;
        spec.use_sdp = scheme == Scheme::HaAsyn;
        let trace = run_experiment(&spec).unwrap();
        assert!(trace.failure.is_none(), "{scheme}: {:?}", trace.failure);
        assert_eq!(trace.ledgers.len(), 12);
        assert_eq!(trace.stop, StopReason::CycleBudget);
        for (g, ledger) in trace.ledgers.iter().enumerate() {
            assert_eq!(ledger.cycle, g + 1);
            assert_eq!(ledger.learners.iter().map(|l| l.d).sum::<u64>(), 1000);
            let taus: Vec<u64> = ledger.learners.iter().map(|l| l.tau).collect();
            let spread = taus.iter().max().unwrap() - taus.iter().min().unwrap();
            assert_eq!(spread, ledger.staleness);
            let cap = if matches!(scheme, Scheme::HaSync | Scheme::HuSync) { 0 } else { 2 };
            assert!(spread <= cap, "{scheme}: staleness {spread}");
            for (l, p) in ledger.learners.iter().zip(&trace.profiles) {
                assert!(l.time_s <= 20.0 * (1.0 + 1e-9));
                assert!(l.energy_j <= p.energy_cap_j * (1.0 + 1e-9));
                assert_eq!(l.used, l.d);
            }
            assert!(ledger.loss.is_finite());
            assert!(ledger.accuracy.is_some_and(|a| (0.0..=1.0).contains(&a)));
            if g > 0 {
                assert!(ledger.aggregation_time_s > trace.ledgers[g - 1].aggregation_time_s);
            }
        }
    }
}

#[test]
fn single_cycle_run_equals_one_step() {
    let spec = ScenarioSpec { cycles: 1, ..desk(6, 10.0, 10.0, 300) };
    let trace = run_experiment(&spec).unwrap();
    let mut sim = Simulator::new(&spec).unwrap();
    let (loss0, _) = sim.evaluate();
    let ledger = sim.run_global_cycle().unwrap();
    assert_eq!(trace.ledgers, vec![ledger.clone()]);
    assert_eq!(trace.initial_loss, loss0);

    // Longer runs share the prefix.
    let longer = run_experiment(&ScenarioSpec { cycles: 3, ..spec }).unwrap();
    assert_eq!(longer.ledgers[0], ledger);
}

#[test]
fn threshold_stops_the_run() {
    let mut spec = desk(10, 10.0, 10.0, 500);
    spec.loss_threshold = Some(10.0);
    let trace = run_experiment(&spec).unwrap();
    assert_eq!(trace.stop, StopReason::Threshold);
    assert_eq!(trace.cycles_to_threshold, Some(1));
    assert_eq!(trace.ledgers.len(), 1);

    spec.stop_at_threshold = false;
    spec.cycles = 3;
    let trace = run_experiment(&spec).unwrap();
    assert_eq!(trace.ledgers.len(), 3);
    assert_eq!(trace.cycles_to_threshold, Some(1));
    assert_eq!(trace.cycles_to_loss(10.0), Some(1));
    assert_eq!(trace.cycles_to_loss(-1.0), None);
}

#[test]
fn infeasible_scenarios_abort_with_a_recorded_failure() {
    let mut spec = desk(4, 10.0, 10.0, 400);
    spec.deadline_s = 1e-3;
    let trace = run_experiment(&spec).unwrap();
    assert_eq!(trace.stop, StopReason::Aborted);
    let failure = trace.failure.unwrap();
    assert_eq!(failure.cycle, 1);
    assert!(trace.ledgers.is_empty());
}

#[test]
fn invalid_scenarios_rejected() {
    let spec = ScenarioSpec::new(0, 10.0, 10.0, 100);
    assert!(matches!(Simulator::new(&spec), Err(MelError::InvalidInput(_))));
    let mut spec = tiny_linear();
    spec.backend = BackendKind::Mlp;
    spec.dataset.kind = DatasetKind::Regression;
    assert!(Simulator::new(&spec).is_err());
    let spec = ScenarioSpec { cycles: 0, ..tiny_linear() };
    assert!(run_experiment(&spec).is_err());
}

#[test]
fn federated_pools_respect_their_size() {
    let mut spec = tiny_linear();
    spec.system.transfer_mode = TransferMode::Federated;
    spec.fl_pool_size = Some(15);
    let trace = run_experiment(&spec).unwrap();
    for ledger in &trace.ledgers {
        for l in &ledger.learners {
            assert_eq!(l.used, l.d.min(15));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_runs_stay_within_budgets(seed in 0u64..1000, t in 5.0f64..30.0, c in 0u64..4) {
        let mut spec = tiny_linear();
        spec.seed = seed;
        spec.deadline_s = t;
        spec.staleness = c;
        let trace = run_experiment(&spec).unwrap();
        for ledger in &trace.ledgers {
            prop_assert!(ledger.staleness <= c);
            for (l, p) in ledger.learners.iter().zip(&trace.profiles) {
                prop_assert!(l.time_s <= t * (1.0 + 1e-9));
                prop_assert!(l.energy_j <= p.energy_cap_j * (1.0 + 1e-9));
            }
        }
    }
}
