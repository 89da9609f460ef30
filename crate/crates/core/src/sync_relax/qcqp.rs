use crate::error::Result;
use crate::problem::AllocationProblem;
use crate::sdp_kernel::{Matrix, SparseSym};

use super::tau_upper_bound;

/// `x^T A x + b^T x + c <= 0` with sparse symmetric `A` and sparse `b`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuadConstraint {
    pub quad: SparseSym,
    pub lin: Vec<(usize, f64)>,
    pub constant: f64,
}

impl QuadConstraint {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for &(i, c) in &self.lin {
            v += c * x[i];
        }
        for &(i, j, a) in self.quad.entries() {
            v += if i == j { a * x[i] * x[i] } else { 2.0 * a * x[i] * x[j] };
        }
        v
    }

    pub fn quad_dense(&self, n: usize) -> Matrix {
        self.quad.to_dense(n)
    }

    pub fn lin_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(i, c) in &self.lin {
            out[i] += c;
        }
        out
    }

    /// Same constraint in variables `y` with `x = scale .* y`, divided by `divisor`.
    pub(crate) fn rescaled(&self, scale: &[f64], divisor: f64) -> Self {
        let mut quad = SparseSym::new();
        for &(i, j, a) in self.quad.entries() {
            quad.add(i, j, a * scale[i] * scale[j] / divisor);
        }
        Self {
            quad,
            lin: self.lin.iter().map(|&(i, c)| (i, c * scale[i] / divisor)).collect(),
            constant: self.constant / divisor,
        }
    }

    pub(crate) fn max_coefficient(&self) -> f64 {
        let q = self.quad.entries().iter().fold(0.0f64, |m, e| m.max(e.2.abs()));
        let l = self.lin.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
        q.max(l).max(self.constant.abs())
    }
}

/// The relaxed synchronous problem as a QCQP over `x = [tau, d_1, ..., d_K]`,
/// in minimization form (objective `-tau`).
///
/// Besides the problem's own constraints it carries redundant quadratic cuts
/// that are valid on the feasible set. Without them the quadratic part of the
/// Lagrangian is a zero-diagonal arrow matrix, which is never PSD unless it
/// vanishes, and the dual LMI has no feasible point.
#[derive(Debug, Clone)]
pub struct QcqpForm {
    pub dim: usize,
    /// Linear objective vector `f`.
    pub objective: Vec<f64>,
    /// `P_k, p_k, p_k^0`
    pub time: Vec<QuadConstraint>,
    /// `Q_k, q_k, q_k^0`
    pub energy: Vec<QuadConstraint>,
    /// `sum d_k - d <= 0`
    pub batch_upper: QuadConstraint,
    /// `d - sum d_k <= 0`
    pub batch_lower: QuadConstraint,
    /// `-tau <= 0`
    pub tau_nonneg: QuadConstraint,
    /// `d_lb - d_k <= 0`
    pub batch_floor: Vec<QuadConstraint>,
    pub cuts: RedundantCuts,
    /// Upper bound on `tau` used by the box cut (and to scale the dual).
    pub tau_bound: f64,
    /// Upper bound on each `d_k` used by the box cuts.
    pub batch_bound: f64,
    pub total_batch: f64,
}

#[derive(Debug, Clone)]
pub struct RedundantCuts {
    /// `tau^2 - tau_ub * tau <= 0`
    pub tau_box: QuadConstraint,
    /// `d_k^2 - d_ub * d_k <= 0`
    pub batch_box: Vec<QuadConstraint>,
    /// `tau * (sum d_k - d) <= 0`
    pub batch_tau_upper: QuadConstraint,
    /// `tau * (d - sum d_k) <= 0`
    pub batch_tau_lower: QuadConstraint,
    /// `tau * (d_lb - d_k) <= 0`
    pub floor_product: Vec<QuadConstraint>,
}

impl QcqpForm {
    pub fn num_learners(&self) -> usize {
        self.dim - 1
    }

    /// Every constraint in multiplier order:
    /// time, energy, batch upper, batch lower, tau >= 0, floors,
    /// then the cuts (tau box, batch boxes, batch-times-tau pair, floor products).
    pub fn constraints(&self) -> Vec<&QuadConstraint> {
        let mut out: Vec<&QuadConstraint> = Vec::new();
        out.extend(self.time.iter());
        out.extend(self.energy.iter());
        out.push(&self.batch_upper);
        out.push(&self.batch_lower);
        out.push(&self.tau_nonneg);
        out.extend(self.batch_floor.iter());
        out.push(&self.cuts.tau_box);
        out.extend(self.cuts.batch_box.iter());
        out.push(&self.cuts.batch_tau_upper);
        out.push(&self.cuts.batch_tau_lower);
        out.extend(self.cuts.floor_product.iter());
        out
    }

    pub fn num_constraints(&self) -> usize {
        5 * self.num_learners() + 6
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Variable scaling used by the dual solver.
    pub(crate) fn variable_scale(&self) -> Vec<f64> {
        let mut s = vec![self.total_batch; self.dim];
        s[0] = if self.tau_bound > 0.0 { self.tau_bound } else { 1.0 };
        s
    }
}

/// Builds the QCQP for the relaxed synchronous problem.
pub fn assemble_qcqp(prob: &AllocationProblem) -> Result<QcqpForm> {
    prob.validate()?;
    let k = prob.num_learners();
    let n = k + 1;
    let d = prob.total();
    let floor = prob.floor();
    let t = prob.deadline_s;

    let mut time = Vec::with_capacity(k);
    let mut energy = Vec::with_capacity(k);
    let mut batch_floor = Vec::with_capacity(k);
    for (i, c) in prob.coeffs.iter().enumerate() {
        let idx = i + 1;
        let mut p = SparseSym::new();
        p.add(0, idx, 0.5 * c.c2);
        time.push(QuadConstraint { quad: p, lin: vec![(idx, c.c1)], constant: c.c0 - t });
        let mut q = SparseSym::new();
        q.add(0, idx, 0.5 * c.g2);
        energy.push(QuadConstraint { quad: q, lin: vec![(idx, c.g1)], constant: c.g0 - prob.energy_caps_j[i] });
        batch_floor.push(QuadConstraint { quad: SparseSym::new(), lin: vec![(idx, -1.0)], constant: floor });
    }
    let ones: Vec<(usize, f64)> = (1..n).map(|i| (i, 1.0)).collect();
    let batch_upper = QuadConstraint { quad: SparseSym::new(), lin: ones.clone(), constant: -d };
    let batch_lower = QuadConstraint {
        quad: SparseSym::new(),
        lin: ones.iter().map(|&(i, v)| (i, -v)).collect(),
        constant: d,
    };
    let tau_nonneg = QuadConstraint { quad: SparseSym::new(), lin: vec![(0, -1.0)], constant: 0.0 };

    let tau_bound = tau_upper_bound(prob).max(0.0);
    // One sample of slack keeps the box from coinciding with the batch
    // equality when K = 1 (that would give the dual a flat direction).
    let batch_bound = d - (k as f64 - 1.0) * floor + 1.0;

    let mut tau_box_q = SparseSym::new();
    tau_box_q.add(0, 0, 1.0);
    let tau_box = QuadConstraint { quad: tau_box_q, lin: vec![(0, -tau_bound)], constant: 0.0 };
    let batch_box = (1..n)
        .map(|i| {
            let mut q = SparseSym::new();
            q.add(i, i, 1.0);
            QuadConstraint { quad: q, lin: vec![(i, -batch_bound)], constant: 0.0 }
        })
        .collect();
    let mut up = SparseSym::new();
    let mut down = SparseSym::new();
    for i in 1..n {
        up.add(0, i, 0.5);
        down.add(0, i, -0.5);
    }
    let batch_tau_upper = QuadConstraint { quad: up, lin: vec![(0, -d)], constant: 0.0 };
    let batch_tau_lower = QuadConstraint { quad: down, lin: vec![(0, d)], constant: 0.0 };
    let floor_product = (1..n)
        .map(|i| {
            let mut q = SparseSym::new();
            q.add(0, i, -0.5);
            QuadConstraint { quad: q, lin: vec![(0, floor)], constant: 0.0 }
        })
        .collect();

    let mut objective = vec![0.0; n];
    objective[0] = -1.0;

    Ok(QcqpForm {
        dim: n,
        objective,
        time,
        energy,
        batch_upper,
        batch_lower,
        tau_nonneg,
        batch_floor,
        cuts: RedundantCuts { tau_box, batch_box, batch_tau_upper, batch_tau_lower, floor_product },
        tau_bound,
        batch_bound,
        total_batch: d,
    })
}
