use mel_core::learn_core::{
    check_divergence, divergence_bound, estimate_beta, estimate_delta, local_update, regression_from,
    synthetic_classification, synthetic_regression, Backend, Dataset, LinearRegression, Mlp,
};
use mel_core::MelError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn central_difference<B: Backend>(b: &B, w: &[f64], data: &Dataset) -> Vec<f64> {
    let h = 1e-6;
    (0..w.len())
        .map(|j| {
            let mut plus = w.to_vec();
            let mut minus = w.to_vec();
            plus[j] += h;
            minus[j] -= h;
            (b.loss(&plus, data) - b.loss(&minus, data)) / (2.0 * h)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, _) = synthetic_regression(&mut rng, 40, 6, 0.3);
        let lin = LinearRegression { features: 6 };
        let w: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = lin.gradient(&w, &data);
        let fd = central_difference(&lin, &w, &data);
        assert!(dist(&g, &fd) <= 1e-5 * norm(&g).max(1e-3), "linear seed {seed}");

        let data = synthetic_classification(&mut rng, 30, 4, 3, 1.0, 1.0);
        let mlp = Mlp { inputs: 4, hidden: 5, classes: 3 };
        let w = mlp.init(&mut rng);
        let g = mlp.gradient(&w, &data);
        let fd = central_difference(&mlp, &w, &data);
        assert!(dist(&g, &fd) <= 1e-5 * norm(&g).max(1e-3), "mlp seed {seed}: {}", dist(&g, &fd));
    }
}

/// Straight-line evaluation of the tanh/softmax network with log-sum-exp.
fn mlp_loss_oracle(m: &Mlp, w: &[f64], data: &Dataset) -> f64 {
    let (ni, nh, nc) = (m.inputs, m.hidden, m.classes);
    let w1 = &w[..nh * ni];
    let b1 = &w[nh * ni..nh * ni + nh];
    let w2 = &w[nh * ni + nh..nh * ni + nh + nc * nh];
    let b2 = &w[nh * ni + nh + nc * nh..];
    let mut total = 0.0;
    for i in 0..data.len() {
        let x = data.row(i);
        let h: Vec<f64> = (0..nh).map(|a| (b1[a] + (0..ni).map(|j| w1[a * ni + j] * x[j]).sum::<f64>()).tanh()).collect();
        let z: Vec<f64> = (0..nc).map(|c| b2[c] + (0..nh).map(|a| w2[c * nh + a] * h[a]).sum::<f64>()).collect();
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
        total += lse - z[data.targets[i] as usize];
    }
    total / data.len() as f64
}

#[test]
fn losses_match_loop_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (data, _) = synthetic_regression(&mut rng, 25, 3, 0.5);
        let lin = LinearRegression { features: 3 };
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut oracle = 0.0;
        for i in 0..data.len() {
            let r = (0..3).map(|j| w[j] * data.features[i * 3 + j]).sum::<f64>() - data.targets[i];
            oracle += r * r;
        }
        oracle /= data.len() as f64;
        assert!((lin.loss(&w, &data) - oracle).abs() <= 1e-12 * oracle.max(1.0));

        let data = synthetic_classification(&mut rng, 25, 3, 4, 2.0, 1.0);
        let mlp = Mlp { inputs: 3, hidden: 6, classes: 4 };
        let w = mlp.init(&mut rng);
        let oracle = mlp_loss_oracle(&mlp, &w, &data);
        assert!((mlp.loss(&w, &data) - oracle).abs() <= 1e-12 * oracle.max(1.0));
    }
}

#[test]
fn duplicating_data_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let data = synthetic_classification(&mut rng, 20, 3, 2, 1.0, 1.0);
    let twice = Dataset::concat(&[&data, &data]).unwrap();
    let mlp = Mlp { inputs: 3, hidden: 4, classes: 2 };
    let w = mlp.init(&mut rng);
    assert!((mlp.loss(&w, &data) - mlp.loss(&w, &twice)).abs() < 1e-13);
    assert!(dist(&mlp.gradient(&w, &data), &mlp.gradient(&w, &twice)) < 1e-13);
    assert_eq!(mlp.accuracy(&w, &data), mlp.accuracy(&w, &twice));
}

#[test]
fn smoothness_of_scaled_orthonormal_design() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for f in [1usize, 2, 5, 8] {
        let s: f64 = rng.random_range(0.2..3.0);
        // Rows s*sqrt(f) * H e_j with a Householder reflection H, each used m times.
        let v: Vec<f64> = (0..f).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let m = 3;
        let mut features = Vec::new();
        for _ in 0..m {
            for j in 0..f {
                for i in 0..f {
                    let h = f64::from(u8::from(i == j)) - 2.0 * v[i] * v[j] / vv;
                    features.push(s * (f as f64).sqrt() * h);
                }
            }
        }
        let data = Dataset::new(features, vec![0.0; m * f], f, None).unwrap();
        let beta = estimate_beta(&data).unwrap();
        assert!((beta - 2.0 * s * s).abs() <= 1e-10 * beta, "f = {f}: {beta} vs {}", 2.0 * s * s);
    }
}

#[test]
fn identical_partitions_have_no_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (data, _) = synthetic_regression(&mut rng, 30, 4, 0.2);
    let parts = vec![data.clone(), data.clone(), data.clone()];
    let union = Dataset::concat(&[&data, &data, &data]).unwrap();
    let lin = LinearRegression { features: 4 };
    let points: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    for d in estimate_delta(&lin, &parts, &union, &points) {
        assert!(d < 1e-12);
    }
}

#[test]
fn gradient_divergence_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let f = 3;
    let parts: Vec<Dataset> = (0..3)
        .map(|_| {
            let w: Vec<f64> = (0..f).map(|_| rng.random_range(-2.0..2.0)).collect();
            let n = 20 + rng.random_range(0..10);
            regression_from(&mut rng, n, &w, 0.1)
        })
        .collect();
    let refs: Vec<&Dataset> = parts.iter().collect();
    let union = Dataset::concat(&refs).unwrap();
    let lin = LinearRegression { features: f };
    let points: Vec<Vec<f64>> = (0..6).map(|_| (0..f).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    // 2/n X^T (X w - y), written out.
    let grad = |d: &Dataset, w: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; f];
        for i in 0..d.len() {
            let r: f64 = (0..f).map(|j| d.features[i * f + j] * w[j]).sum::<f64>() - d.targets[i];
            for j in 0..f {
                g[j] += 2.0 * r * d.features[i * f + j] / d.len() as f64;
            }
        }
        g
    };
    let got = estimate_delta(&lin, &parts, &union, &points);
    for (k, part) in parts.iter().enumerate() {
        let want = points.iter().map(|w| dist(&grad(part, w), &grad(&union, w))).fold(0.0, f64::max);
        assert!((got[k] - want).abs() <= 1e-12 * want.max(1.0));
    }
}

#[test]
fn divergence_bound_examples() {
    let (delta, beta) = (0.7, 4.0);
    assert_eq!(divergence_bound(delta, beta, 0.25, 0), 0.0);
    assert!((divergence_bound(delta, beta, 0.25, 1) - 0.25 * delta).abs() < 1e-15);
    assert!((divergence_bound(delta, beta, 0.25, 3) - 7.0 * delta / beta).abs() < 1e-15);
    assert_eq!(divergence_bound(0.0, beta, 0.25, 10), 0.0);
}

fn heterogeneous_regression(rng: &mut ChaCha8Rng, k: usize, f: usize) -> Vec<Dataset> {
    (0..k)
        .map(|_| {
            let w: Vec<f64> = (0..f).map(|_| rng.random_range(-2.0..2.0)).collect();
            let n = 15 + rng.random_range(0..20);
            regression_from(rng, n, &w, 0.3)
        })
        .collect()
}

#[test]
fn convex_replay_stays_within_bound() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let parts = heterogeneous_regression(&mut rng, 4, 3);
        let refs: Vec<&Dataset> = parts.iter().collect();
        let union = Dataset::concat(&refs).unwrap();
        // Every local loss must be beta-smooth for the bound to apply.
        let beta = parts.iter().chain([&union]).map(|d| estimate_beta(d).unwrap()).fold(0.0, f64::max);
        let eta = 0.5 / beta;
        let lin = LinearRegression { features: 3 };
        let tau = [1, 3, 5, 2];
        let report = check_divergence(&lin, &parts, &tau, 3, eta, beta, &[0.0; 3]).unwrap();
        assert_eq!(report.violations, 0, "seed {seed}");
        assert_eq!(report.steps.len(), 3 * tau.iter().map(|t| t + 1).sum::<u64>() as usize);
        for s in &report.steps {
            assert!(s.bound_aux_clock >= s.bound_local);
            if s.step == 0 {
                assert!(s.distance < 1e-12);
            }
        }
    }
}

#[test]
fn non_convex_replay_reports_its_violations() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let centres_seeded: Vec<Dataset> =
        (0..3).map(|_| synthetic_classification(&mut rng, 25, 3, 2, 1.5, 1.0)).collect();
    let mlp = Mlp { inputs: 3, hidden: 4, classes: 2 };
    let w0 = mlp.init(&mut rng);
    let report = check_divergence(&mlp, &centres_seeded, &[2, 4, 3], 2, 0.3, 1.0, &w0).unwrap();
    assert_eq!(report.violations, report.steps.iter().filter(|s| s.violated).count());
    assert!(report.steps.iter().all(|s| s.distance.is_finite()));
}

#[test]
fn divergence_check_rejects_bad_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let parts = heterogeneous_regression(&mut rng, 2, 2);
    let lin = LinearRegression { features: 2 };
    assert!(matches!(check_divergence(&lin, &parts, &[1], 1, 0.1, 1.0, &[0.0; 2]), Err(MelError::Contract(_))));
    assert!(check_divergence(&lin, &parts, &[1, 1], 1, 0.0, 1.0, &[0.0; 2]).is_err());
    assert!(check_divergence(&lin, &parts, &[1, 1], 1, 0.1, 1.0, &[0.0; 3]).is_err());
}

#[test]
fn local_update_closed_forms() {
    // One sample in one dimension: w' = w - 2 eta x (w x - y).
    let data = Dataset::new(vec![1.5], vec![2.0], 1, None).unwrap();
    let lin = LinearRegression { features: 1 };
    let w = local_update(&lin, &[0.4], &data, 0.1).unwrap();
    assert!((w[0] - (0.4 - 0.2 * 1.5 * (0.4 * 1.5 - 2.0))).abs() < 1e-15);

    // Noise-free data: the true weights are a fixed point.
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let truth = vec![0.5, -1.0, 2.0];
    let data = regression_from(&mut rng, 30, &truth, 0.0);
    let w = local_update(&lin_of(3), &truth, &data, 0.2).unwrap();
    assert!(dist(&w, &truth) < 1e-13);

    let empty = Dataset::new(vec![], vec![], 3, None).unwrap();
    assert!(local_update(&lin_of(3), &truth, &empty, 0.2).is_err());
    assert!(matches!(local_update(&lin_of(3), &[f64::NAN, 0.0, 0.0], &data, 0.2), Err(MelError::Numerical(_))));
}

fn lin_of(f: usize) -> LinearRegression {
    LinearRegression { features: f }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convex_loss_never_increases_with_small_steps(seed in 0u64..10_000, steps in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, _) = synthetic_regression(&mut rng, 30, 4, 0.5);
        let beta = estimate_beta(&data).unwrap();
        let lin = lin_of(4);
        let mut w: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut last = lin.loss(&w, &data);
        for _ in 0..steps {
            w = local_update(&lin, &w, &data, 1.0 / beta).unwrap();
            let now = lin.loss(&w, &data);
            prop_assert!(now <= last * (1.0 + 1e-12) + 1e-15);
            last = now;
        }
    }

    #[test]
    fn accuracy_is_a_fraction(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = synthetic_classification(&mut rng, 17, 2, 3, 1.0, 1.0);
        let mlp = Mlp { inputs: 2, hidden: 3, classes: 3 };
        let w = mlp.init(&mut rng);
        let acc = mlp.accuracy(&w, &data).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        prop_assert!((acc * 17.0 - (acc * 17.0).round()).abs() < 1e-9);
        prop_assert!(lin_of(2).accuracy(&[0.0, 0.0], &data).is_none());
    }
}
