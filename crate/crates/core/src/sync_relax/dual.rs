use crate::error::{MelError, Result};
use crate::problem::AllocationProblem;
use crate::sdp_kernel::{pseudo_inverse, solve_lmi_barrier, BarrierParams, Cholesky, LmiProblem, Matrix, SparseSym};

use super::qcqp::{QcqpForm, QuadConstraint};
use super::{project_feasible, SyncSolution, SyncSource};

/// Lagrange multipliers of the relaxed synchronous QCQP plus the dual objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMultipliers {
    /// Time constraints.
    pub lambda: Vec<f64>,
    /// Energy constraints.
    pub gamma: Vec<f64>,
    /// `sum d_k <= d`
    pub alpha: f64,
    /// `sum d_k >= d`
    pub alpha_bar: f64,
    /// `tau >= 0`
    pub omega: f64,
    /// Batch floors.
    pub nu: Vec<f64>,
    pub tau_box: f64,
    pub batch_box: Vec<f64>,
    pub batch_tau_upper: f64,
    pub batch_tau_lower: f64,
    pub floor_product: Vec<f64>,
    /// Dual objective value (a lower bound on `min -tau`).
    pub zeta: f64,
}

impl DualMultipliers {
    pub fn zero(k: usize) -> Self {
        Self {
            lambda: vec![0.0; k],
            gamma: vec![0.0; k],
            alpha: 0.0,
            alpha_bar: 0.0,
            omega: 0.0,
            nu: vec![0.0; k],
            tau_box: 0.0,
            batch_box: vec![0.0; k],
            batch_tau_upper: 0.0,
            batch_tau_lower: 0.0,
            floor_product: vec![0.0; k],
            zeta: 0.0,
        }
    }

    /// Multipliers in the order of [`QcqpForm::constraints`] (without `zeta`).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(5 * self.lambda.len() + 6);
        v.extend(&self.lambda);
        v.extend(&self.gamma);
        v.push(self.alpha);
        v.push(self.alpha_bar);
        v.push(self.omega);
        v.extend(&self.nu);
        v.push(self.tau_box);
        v.extend(&self.batch_box);
        v.push(self.batch_tau_upper);
        v.push(self.batch_tau_lower);
        v.extend(&self.floor_product);
        v
    }

    pub fn from_vec(k: usize, v: &[f64], zeta: f64) -> Self {
        assert_eq!(v.len(), 5 * k + 6, "multiplier vector length");
        let mut it = v.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { (&mut it).take(n).collect() };
        let lambda = take(k);
        let gamma = take(k);
        let abo = take(3);
        let nu = take(k);
        let tau_box = take(1)[0];
        let batch_box = take(k);
        let bt = take(2);
        let floor_product = take(k);
        Self {
            lambda,
            gamma,
            alpha: abo[0],
            alpha_bar: abo[1],
            omega: abo[2],
            nu,
            tau_box,
            batch_box,
            batch_tau_upper: bt[0],
            batch_tau_lower: bt[1],
            floor_product,
            zeta,
        }
    }

    pub fn min_multiplier(&self) -> f64 {
        self.to_vec().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Quadratic, linear and constant parts of the Lagrangian,
/// `L(x) = x^T F2 x + f1^T x + f0`. The linear part includes the objective vector.
pub fn assemble_dual_functions(gamma: &DualMultipliers, qcqp: &QcqpForm) -> (Matrix, Vec<f64>, f64) {
    let n = qcqp.dim;
    let mut f2 = Matrix::zeros(n);
    let mut f1 = qcqp.objective.clone();
    let mut f0 = 0.0;
    for (mu, c) in gamma.to_vec().into_iter().zip(qcqp.constraints()) {
        if mu == 0.0 {
            continue;
        }
        c.quad.add_to(&mut f2, mu);
        for &(i, v) in &c.lin {
            f1[i] += mu * v;
        }
        f0 += mu * c.constant;
    }
    (f2, f1, f0)
}

/// The dual LMI `[[F2, f1/2], [f1^T/2, f0 - zeta]]`.
pub fn lmi_matrix(gamma: &DualMultipliers, qcqp: &QcqpForm) -> Matrix {
    let (f2, f1, f0) = assemble_dual_functions(gamma, qcqp);
    let n = qcqp.dim;
    let mut m = Matrix::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = f2[(i, j)];
        }
        m[(i, n)] = 0.5 * f1[i];
        m[(n, i)] = 0.5 * f1[i];
    }
    m[(n, n)] = f0 - gamma.zeta;
    m
}

/// Lagrangian written out term by term from the cost coefficients.
pub fn lagrangian_value(x: &[f64], gamma: &DualMultipliers, prob: &AllocationProblem, qcqp: &QcqpForm) -> f64 {
    let tau = x[0];
    let d = &x[1..];
    let total = prob.total();
    let sum_d: f64 = d.iter().sum();
    let mut l = -tau;
    for (k, c) in prob.coeffs.iter().enumerate() {
        l += gamma.lambda[k] * (c.c2 * tau * d[k] + c.c1 * d[k] + c.c0 - prob.deadline_s);
        l += gamma.gamma[k] * (c.g2 * tau * d[k] + c.g1 * d[k] + c.g0 - prob.energy_caps_j[k]);
        l += gamma.nu[k] * (prob.floor() - d[k]);
        l += gamma.batch_box[k] * (d[k] * d[k] - qcqp.batch_bound * d[k]);
        l += gamma.floor_product[k] * tau * (prob.floor() - d[k]);
    }
    l += gamma.alpha * (sum_d - total) - gamma.alpha_bar * (sum_d - total);
    l -= gamma.omega * tau;
    l += gamma.tau_box * (tau * tau - qcqp.tau_bound * tau);
    l += (gamma.batch_tau_upper - gamma.batch_tau_lower) * tau * (sum_d - total);
    l
}

/// Dual SDP solution with its certificate data.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub multipliers: DualMultipliers,
    /// Upper bound on the synchronous optimum, `-zeta`.
    pub tau_bound: f64,
    /// Smallest eigenvalue of the normalized LMI at the solution.
    pub min_eigenvalue: f64,
    /// Normalized dual objective after each barrier centering.
    pub outer_objectives: Vec<f64>,
    pub newton_iterations: usize,
}

impl DualSolution {
    pub fn is_monotone(&self) -> bool {
        self.outer_objectives
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()))
    }
}

fn push_constraint(term: &mut SparseSym, c: &QuadConstraint, n: usize) {
    for &(i, j, v) in c.quad.entries() {
        term.add(i, j, v);
    }
    for &(i, v) in &c.lin {
        term.add(i, n, 0.5 * v);
    }
    term.add(n, n, c.constant);
}

/// Maximizes the dual objective over the LMI with the barrier kernel.
///
/// The LMI is formed for a normalized copy of the QCQP (variables scaled to
/// `[0, 1]`, every constraint divided by its largest coefficient); multipliers
/// are mapped back to the raw problem afterwards.
pub fn solve_dual_sdp(qcqp: &QcqpForm, params: &BarrierParams) -> Result<DualSolution> {
    let n = qcqp.dim;
    let k = qcqp.num_learners();
    let scale = qcqp.variable_scale();
    let obj_scale = scale[0];

    let raw = qcqp.constraints();
    let mut divisors = Vec::with_capacity(raw.len());
    let mut scaled = Vec::with_capacity(raw.len());
    for c in &raw {
        let unit = c.rescaled(&scale, 1.0);
        let r = unit.max_coefficient();
        let r = if r > 0.0 { r } else { 1.0 };
        divisors.push(r);
        scaled.push(unit.rescaled(&vec![1.0; n], r));
    }

    let mut constant = SparseSym::new();
    for (i, &f) in qcqp.objective.iter().enumerate() {
        constant.add(i, n, 0.5 * f * scale[i] / obj_scale);
    }

    // Each equality pair (batch sum, batch sum times tau) gets one free
    // multiplier: two nonnegative ones would leave a flat direction in which
    // both grow without changing the LMI, and the barrier would diverge.
    let pairs = [(2 * k, 2 * k + 1), (4 * k + 4, 4 * k + 5)];
    let dropped: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let free: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let var_of: Vec<usize> = (0..scaled.len()).filter(|i| !dropped.contains(i)).collect();

    let mut terms: Vec<SparseSym> = var_of
        .iter()
        .map(|&i| {
            let mut t = SparseSym::new();
            push_constraint(&mut t, &scaled[i], n);
            t
        })
        .collect();
    let mut zeta_term = SparseSym::new();
    zeta_term.add(n, n, -1.0);
    terms.push(zeta_term);
    let m = terms.len();

    // The diagonal box cuts make the quadratic block definite at the start.
    let tau_box = 3 * k + 3;
    let is_box = |i: usize| i >= tau_box && i <= tau_box + k;

    let mut start: Vec<f64> = var_of.iter().map(|&i| if free.contains(&i) { 0.0 } else { 1e-2 }).collect();
    start.push(0.0);
    let mut sigma = 1.0;
    let (f2, f1, f0) = loop {
        for (v, &i) in var_of.iter().enumerate() {
            if is_box(i) {
                start[v] = sigma;
            }
        }
        let mut f2 = Matrix::zeros(n);
        let mut f1 = vec![0.0; n];
        f1[0] = -1.0;
        let mut f0 = 0.0;
        for (v, &i) in var_of.iter().enumerate() {
            let c = &scaled[i];
            let w = start[v];
            c.quad.add_to(&mut f2, w);
            for &(j, a) in &c.lin {
                f1[j] += w * a;
            }
            f0 += w * c.constant;
        }
        if Cholesky::new(&f2).is_some() {
            break (f2, f1, f0);
        }
        sigma *= 2.0;
        if sigma > 1e12 {
            return Err(MelError::Numerical("could not build a strictly feasible dual start".into()));
        }
    };
    let chol = Cholesky::new(&f2).expect("checked above");
    let sol = chol.solve(&f1);
    let schur: f64 = f1.iter().zip(&sol).map(|(a, b)| a * b).sum();
    start[m - 1] = f0 - 0.25 * schur - 1.0;

    let mut objective = vec![0.0; m];
    objective[m - 1] = 1.0;
    let mut nonneg: Vec<bool> = var_of.iter().map(|i| !free.contains(i)).collect();
    nonneg.push(false);
    let lmi = LmiProblem { order: n + 1, constant, terms, objective, nonneg, start };
    let out = solve_lmi_barrier(&lmi, params)?;

    let zeta_scaled = out.z[m - 1];
    let mut raw_mu = vec![0.0; scaled.len()];
    for (v, &i) in var_of.iter().enumerate() {
        let mu = out.z[v] * obj_scale / divisors[i];
        if let Some(&(_, lo)) = pairs.iter().find(|p| p.0 == i) {
            raw_mu[i] = mu.max(0.0);
            raw_mu[lo] = (-mu).max(0.0);
        } else {
            raw_mu[i] = mu;
        }
    }
    let multipliers = DualMultipliers::from_vec(k, &raw_mu, zeta_scaled * obj_scale);
    Ok(DualSolution {
        tau_bound: -zeta_scaled * obj_scale,
        multipliers,
        min_eigenvalue: out.min_eigenvalue,
        outer_objectives: out.outer_objectives,
        newton_iterations: out.newton_iterations,
    })
}

/// Candidate point `x = -1/4 pinv(F2) f1`, projected onto the relaxed feasible set.
pub fn extract_candidate(gamma: &DualMultipliers, qcqp: &QcqpForm, prob: &AllocationProblem) -> Result<SyncSolution> {
    let (f2, f1, _) = assemble_dual_functions(gamma, qcqp);
    let f1_norm = f1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if f2.max_abs() <= 1e-14 * (1.0 + f1_norm) {
        if f1_norm > 0.0 {
            return Err(MelError::DegenerateDual);
        }
        return project_feasible(&vec![0.0; qcqp.dim], prob, SyncSource::SdpCandidate);
    }
    let pinv = pseudo_inverse(&f2, 1e-12)?;
    let x: Vec<f64> = pinv.matvec(&f1).into_iter().map(|v| -0.25 * v).collect();
    project_feasible(&x, prob, SyncSource::SdpCandidate)
}
