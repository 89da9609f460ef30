use mel_core::sdp_kernel::{
    min_eigenvalue, pseudo_inverse, solve_lmi_barrier, BarrierParams, Cholesky, LmiProblem, Matrix, SparseSym,
    SymmetricEigen,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0);
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    Matrix::from_rows(&rows)
}

/// Cyclic Jacobi rotations on a plain `Vec<Vec<f64>>`, eigenvalues only.
fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.order();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn eigenvalues_match_jacobi_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [1, 2, 3, 5, 8, 13, 22] {
        for _ in 0..5 {
            let a = random_symmetric(&mut rng, n);
            let eig = SymmetricEigen::new(&a).unwrap();
            let oracle = jacobi_eigenvalues(&a);
            for (x, y) in eig.values.iter().zip(&oracle) {
                assert!((x - y).abs() < 1e-10, "n = {n}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn eigen_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = random_symmetric(&mut rng, 9);
    let eig = SymmetricEigen::new(&a).unwrap();
    let v = &eig.vectors;
    let mut rec = Matrix::zeros(9);
    for (k, lam) in eig.values.iter().enumerate() {
        for i in 0..9 {
            for j in 0..9 {
                rec[(i, j)] += lam * v[(i, k)] * v[(j, k)];
            }
        }
    }
    assert!(rec.sub(&a).max_abs() < 1e-12);
}

#[test]
fn penrose_identities_for_singular_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [2, 4, 7] {
        for rank in 1..n {
            // A = B B^T with B of size n x rank.
            let b: Vec<Vec<f64>> = (0..n).map(|_| (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let rows: Vec<Vec<f64>> =
                (0..n).map(|i| (0..n).map(|j| (0..rank).map(|k| b[i][k] * b[j][k]).sum()).collect()).collect();
            let a = Matrix::from_rows(&rows);
            let p = pseudo_inverse(&a, 1e-12).unwrap();
            let apa = a.matmul(&p).matmul(&a);
            let pap = p.matmul(&a).matmul(&p);
            assert!(apa.sub(&a).max_abs() < 1e-9 * (1.0 + a.max_abs()));
            assert!(pap.sub(&p).max_abs() < 1e-9 * (1.0 + p.max_abs()));
            assert!(a.matmul(&p).is_symmetric(1e-9));
            assert!(p.matmul(&a).is_symmetric(1e-9));
        }
    }
}

#[test]
fn cholesky_solves_spd_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r = random_symmetric(&mut rng, 6);
    let mut a = r.matmul(&r);
    a.scaled_add(1.0, &Matrix::identity(6));
    let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
    let b = a.matvec(&x);
    let chol = Cholesky::new(&a).unwrap();
    let sol = chol.solve(&b);
    for (s, t) in sol.iter().zip(&x) {
        assert!((s - t).abs() < 1e-10);
    }
    let eig = SymmetricEigen::new(&a).unwrap();
    let log_det: f64 = eig.values.iter().map(|v| v.ln()).sum();
    assert!((chol.log_det() - log_det).abs() < 1e-10);
    assert!(Cholesky::new(&Matrix::from_diag(&[1.0, -1.0])).is_none());
}

#[test]
fn barrier_solves_two_by_two_lmi() {
    // maximize z  s.t.  [[1, z], [z, 1]] >= 0  ->  z = 1.
    let mut constant = SparseSym::new();
    constant.add(0, 0, 1.0);
    constant.add(1, 1, 1.0);
    let mut term = SparseSym::new();
    term.add(0, 1, 1.0);
    let prob = LmiProblem {
        order: 2,
        constant,
        terms: vec![term],
        objective: vec![1.0],
        nonneg: vec![false],
        start: vec![0.0],
    };
    let sol = solve_lmi_barrier(&prob, &BarrierParams::default()).unwrap();
    assert!((sol.z[0] - 1.0).abs() < 1e-6, "{}", sol.z[0]);
    assert!(sol.min_eigenvalue >= -1e-8);
    assert!(sol.is_monotone());
}

#[test]
fn barrier_solves_diagonal_lp() {
    // maximize z1 + 2 z2 s.t. 3 - z1 >= 0, 4 - z2 >= 0, z >= 0.
    let mut constant = SparseSym::new();
    constant.add(0, 0, 3.0);
    constant.add(1, 1, 4.0);
    let mut t1 = SparseSym::new();
    t1.add(0, 0, -1.0);
    let mut t2 = SparseSym::new();
    t2.add(1, 1, -1.0);
    let prob = LmiProblem {
        order: 2,
        constant,
        terms: vec![t1, t2],
        objective: vec![1.0, 2.0],
        nonneg: vec![true, true],
        start: vec![1.0, 1.0],
    };
    let sol = solve_lmi_barrier(&prob, &BarrierParams::default()).unwrap();
    assert!((sol.objective - 11.0).abs() < 1e-5);
}

#[test]
fn infeasible_start_rejected() {
    let mut constant = SparseSym::new();
    constant.add(0, 0, -1.0);
    let prob = LmiProblem {
        order: 1,
        constant,
        terms: vec![SparseSym::new()],
        objective: vec![1.0],
        nonneg: vec![false],
        start: vec![0.0],
    };
    assert!(solve_lmi_barrier(&prob, &BarrierParams::default()).is_err());
}

proptest! {
    #[test]
    fn min_eigenvalue_bounds_rayleigh_quotients(seed in 0u64..500, n in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_symmetric(&mut rng, n);
        let lo = min_eigenvalue(&a, 1e-12).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nn: f64 = x.iter().map(|v| v * v).sum();
            prop_assume!(nn > 1e-6);
            prop_assert!(a.quad_form(&x) / nn >= lo - 1e-10);
        }
    }
}
