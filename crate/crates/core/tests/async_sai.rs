use mel_core::async_sai::{
    brute_force_small, check_allocation, floor_and_repair, ha_asyn, hu_equal_allocation, improve_cd, integer_sync,
    integer_waterfill, polish, solve_scheme, staleness, HuMode, SaiOptions,
};
use mel_core::instances::{random_problem, InstanceRanges};
use mel_core::sync_relax::bisection_oracle;
use mel_core::{AllocationProblem, AsyncProblem, Scheme, SystemParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, ranges: &InstanceRanges) -> AllocationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_problem(&mut rng, ranges, &SystemParams::default())
}

fn fast() -> SaiOptions {
    SaiOptions { use_sdp: false, ..SaiOptions::default() }
}

#[test]
fn cd_without_staleness_reproduces_the_synchronous_optimum() {
    for seed in 0..60 {
        let p = instance(seed, &InstanceRanges::default());
        let sync = bisection_oracle(&p).unwrap();
        let run = improve_cd(&sync, &AsyncProblem::new(p.clone(), 0)).unwrap();
        let got = run.objective();
        assert!((got - sync.tau).abs() <= 1e-4 * sync.tau.max(1.0), "seed {seed}: {got} vs {}", sync.tau);
        assert!(run.result().staleness() <= 1e-6 * sync.tau.max(1.0));
    }
}

#[test]
fn cd_history_never_decreases() {
    for seed in 0..30 {
        let p = instance(seed, &InstanceRanges::default());
        let sync = bisection_oracle(&p).unwrap();
        let run = improve_cd(&sync, &AsyncProblem::new(p, 3)).unwrap();
        assert_eq!(run.stages.len(), 4);
        assert_eq!(run.stage_caps, vec![0, 1, 2, 3]);
        for w in run.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
        }
        for (s, stage) in run.stages.iter().enumerate() {
            assert!(stage.staleness() <= run.stage_caps[s] as f64 + 1e-6);
        }
    }
}

fn tiny_ranges() -> InstanceRanges {
    InstanceRanges { learners: (2, 3), max_total_batch: 240, max_floor: 3, ..InstanceRanges::default() }
}

#[test]
fn exact_search_sandwiches_the_heuristic() {
    let mut checked = 0;
    for seed in 0..40 {
        let mut p = instance(seed, &tiny_ranges());
        p.batch_floor = p.batch_floor.max(1);
        if p.validate().is_err() {
            continue;
        }
        for c in [0, 1, 3] {
            let prob = AsyncProblem::new(p.clone(), c);
            let exact = brute_force_small(&prob, 1_000_000, 1).unwrap();
            let heur = ha_asyn(&prob, &fast()).unwrap().allocation;
            let sync = integer_sync(&p).unwrap();
            assert!(check_allocation(&prob, &exact).is_empty());
            assert!(check_allocation(&prob, &heur).is_empty());
            assert!(sync.objective <= heur.objective + 1e-12, "seed {seed} c {c}");
            assert!(heur.objective <= exact.objective + 1e-12, "seed {seed} c {c}: {} > {}", heur.objective, exact.objective);
            checked += 1;
        }
    }
    assert!(checked >= 60, "only {checked} instances checked");
}

#[test]
fn exact_search_refuses_large_instances() {
    let p = instance(1, &InstanceRanges { learners: (4, 4), ..InstanceRanges::default() });
    assert!(brute_force_small(&AsyncProblem::new(p, 1), 100, 1).is_err());
    let p = instance(2, &InstanceRanges { learners: (3, 3), max_total_batch: 60_000, ..InstanceRanges::default() });
    if p.total_batch > 10_000 {
        assert!(brute_force_small(&AsyncProblem::new(p, 1), 100, 1).is_err());
    }
}

#[test]
fn objective_grows_with_staleness_cap() {
    for seed in 0..25 {
        let p = instance(seed, &InstanceRanges::default());
        let mut last = 0.0;
        for c in 0..6 {
            let a = ha_asyn(&AsyncProblem::new(p.clone(), c), &fast()).unwrap().allocation;
            assert!(a.objective >= last - 1e-12, "seed {seed} c {c}: {} < {last}", a.objective);
            assert!(a.staleness <= c);
            last = a.objective;
        }
    }
}

#[test]
fn equal_split_baselines_are_feasible() {
    for seed in 0..40 {
        let p = instance(seed, &InstanceRanges::default());
        for c in [0, 2] {
            let prob = AsyncProblem::new(p.clone(), c);
            for mode in [HuMode::Sync, HuMode::Async] {
                match hu_equal_allocation(&prob, mode) {
                    Ok(a) => {
                        assert!(check_allocation(&prob, &a).is_empty(), "{:?}", check_allocation(&prob, &a));
                        let (lo, hi) = (a.d.iter().min().unwrap(), a.d.iter().max().unwrap());
                        assert!(hi - lo <= 1);
                        if mode == HuMode::Sync {
                            assert_eq!(a.staleness, 0);
                        }
                    }
                    Err(e) => assert!(e.is_infeasible(), "{e}"),
                }
            }
        }
    }
}

#[test]
fn aware_schemes_beat_unaware_ones() {
    for seed in 0..25 {
        let p = instance(seed, &InstanceRanges::default());
        let prob = AsyncProblem::new(p, 2);
        let ha = solve_scheme(&prob, Scheme::HaAsyn, &fast()).unwrap().allocation;
        let hs = solve_scheme(&prob, Scheme::HaSync, &fast()).unwrap().allocation;
        assert!(ha.objective >= hs.objective);
        if let Ok(hu) = solve_scheme(&prob, Scheme::HuSync, &fast()) {
            assert!(hs.objective >= hu.allocation.objective);
        }
    }
}

#[test]
fn staleness_of_vectors() {
    assert_eq!(staleness(&[]), 0);
    assert_eq!(staleness(&[4]), 0);
    assert_eq!(staleness(&[3, 7, 5]), 4);
}

#[test]
fn integer_waterfill_examples() {
    assert_eq!(integer_waterfill(&[10, 2, 30], 0, 20), Some(vec![9, 2, 9]));
    assert_eq!(integer_waterfill(&[5, 5], 1, 11), None);
    assert_eq!(integer_waterfill(&[0, 5], 1, 3), None);
    assert_eq!(integer_waterfill(&[4, 4, 4], 2, 6), Some(vec![2, 2, 2]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn heuristic_allocations_are_feasible(seed in 0u64..100_000, c in 0u64..8) {
        let p = instance(seed, &InstanceRanges::default());
        let prob = AsyncProblem::new(p.clone(), c);
        let out = ha_asyn(&prob, &fast()).unwrap();
        prop_assert!(check_allocation(&prob, &out.allocation).is_empty(), "{:?}", check_allocation(&prob, &out.allocation));

        let sync = bisection_oracle(&p).unwrap();
        let run = improve_cd(&sync, &prob).unwrap();
        prop_assert!(run.objective() >= sync.tau * (1.0 - 1e-9));
        if let Ok(a) = floor_and_repair(run.result(), &prob) {
            prop_assert!(check_allocation(&prob, &a).is_empty());
            let b = polish(&a, &prob);
            prop_assert!(check_allocation(&prob, &b).is_empty());
            prop_assert!(b.objective >= a.objective);
        }
    }

    #[test]
    fn integer_waterfill_properties(
        caps in proptest::collection::vec(0u64..200, 1..10),
        floor in 0u64..5,
        total in 0u64..1500,
    ) {
        let feasible = caps.iter().all(|&c| c >= floor)
            && caps.iter().sum::<u64>() >= total
            && floor * caps.len() as u64 <= total;
        match integer_waterfill(&caps, floor, total) {
            Some(d) => {
                prop_assert_eq!(d.iter().sum::<u64>(), total);
                for (x, cap) in d.iter().zip(&caps) {
                    prop_assert!(*x >= floor && x <= cap);
                }
                // Max-min fair: an uncapped learner sits at most one below anyone above the floor.
                for i in 0..d.len() {
                    for j in 0..d.len() {
                        if d[i] < caps[i] && d[j] > floor {
                            prop_assert!(d[j] <= d[i] + 1, "{:?} caps {:?}", d, caps);
                        }
                    }
                }
            }
            None => prop_assert!(!feasible, "caps {:?} floor {} total {}", caps, floor, total),
        }
    }
}
