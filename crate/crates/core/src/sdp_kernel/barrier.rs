use super::linalg::{min_eigenvalue, Cholesky, Matrix};
use crate::error::{MelError, Result};

/// Symmetric sparse matrix stored as upper-triangle entries `(i, j, v)` with `i <= j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `v` at `(i, j)` and, off the diagonal, at `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        if let Some(e) = self.entries.iter_mut().find(|e| e.0 == a && e.1 == b) {
            e.2 += v;
        } else {
            self.entries.push((a, b, v));
        }
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    fn expanded(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(2 * self.entries.len());
        for &(i, j, v) in &self.entries {
            out.push((i, j, v));
            if i != j {
                out.push((j, i, v));
            }
        }
        out
    }

    pub fn add_to(&self, m: &mut Matrix, scale: f64) {
        for &(i, j, v) in &self.entries {
            m[(i, j)] += scale * v;
            if i != j {
                m[(j, i)] += scale * v;
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> Matrix {
        let mut m = Matrix::zeros(n);
        self.add_to(&mut m, 1.0);
        m
    }
}

/// `maximize c^T z  s.t.  M0 + sum_i z_i M_i >= 0,  z_i >= 0 for flagged i`.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub order: usize,
    pub constant: SparseSym,
    pub terms: Vec<SparseSym>,
    pub objective: Vec<f64>,
    pub nonneg: Vec<bool>,
    /// Strictly feasible point: `M(start) > 0` and flagged entries `> 0`.
    pub start: Vec<f64>,
}

impl LmiProblem {
    pub fn num_vars(&self) -> usize {
        self.terms.len()
    }

    pub fn matrix(&self, z: &[f64]) -> Matrix {
        let mut m = self.constant.to_dense(self.order);
        for (zi, term) in z.iter().zip(&self.terms) {
            if *zi != 0.0 {
                term.add_to(&mut m, *zi);
            }
        }
        m
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, v)| c * v).sum()
    }

    fn validate(&self) -> Result<()> {
        let m = self.terms.len();
        if self.objective.len() != m || self.nonneg.len() != m || self.start.len() != m {
            return Err(MelError::Contract("LMI problem vectors must match the term count".into()));
        }
        for t in self.terms.iter().chain(std::iter::once(&self.constant)) {
            if t.entries.iter().any(|&(i, j, _)| i >= self.order || j >= self.order) {
                return Err(MelError::Contract("LMI term index out of range".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BarrierParams {
    pub initial_t: f64,
    /// Multiplier applied to `t` after each centering.
    pub growth: f64,
    /// Stop once the central-path gap bound `(n + #nonneg) / t` falls below this.
    pub gap_tol: f64,
    /// Centering stops when half the squared Newton decrement falls below this.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub min_step: f64,
    pub objective_cap: f64,
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self {
            initial_t: 1.0,
            growth: 20.0,
            gap_tol: 1e-7,
            newton_tol: 1e-10,
            max_newton: 200,
            min_step: 1e-14,
            objective_cap: 1e12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    /// Smallest eigenvalue of `M(z)` at the returned point.
    pub min_eigenvalue: f64,
    /// `c^T z` at each centered point, in outer-iteration order.
    pub outer_objectives: Vec<f64>,
    pub newton_iterations: usize,
    pub gap_bound: f64,
}

impl LmiSolution {
    pub fn is_monotone(&self) -> bool {
        self.outer_objectives
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()))
    }
}

struct Workspace {
    expanded: Vec<Vec<(usize, usize, f64)>>,
    /// Union of the upper-triangle positions used by any term.
    pattern: Vec<(usize, usize)>,
    /// Per term: `(pattern index, weight)` with off-diagonal entries counted twice.
    weights: Vec<Vec<(usize, f64)>>,
}

impl Workspace {
    fn new(prob: &LmiProblem) -> Self {
        let n = prob.order;
        let mut slot = vec![usize::MAX; n * n];
        let mut pattern = Vec::new();
        let weights = prob
            .terms
            .iter()
            .map(|term| {
                term.entries()
                    .iter()
                    .map(|&(a, b, v)| {
                        if slot[a * n + b] == usize::MAX {
                            slot[a * n + b] = pattern.len();
                            pattern.push((a, b));
                        }
                        (slot[a * n + b], if a == b { v } else { 2.0 * v })
                    })
                    .collect()
            })
            .collect();
        Self { expanded: prob.terms.iter().map(SparseSym::expanded).collect(), pattern, weights }
    }
}

fn barrier_value(prob: &LmiProblem, z: &[f64], t: f64) -> Option<f64> {
    let mut logz = 0.0;
    for (zi, &nn) in z.iter().zip(&prob.nonneg) {
        if nn {
            if *zi <= 0.0 {
                return None;
            }
            logz += zi.ln();
        }
    }
    let chol = Cholesky::new(&prob.matrix(z))?;
    Some(t * prob.objective_value(z) + chol.log_det() + logz)
}

/// Log-det barrier path following with damped Newton centering.
pub fn solve_lmi_barrier(prob: &LmiProblem, params: &BarrierParams) -> Result<LmiSolution> {
    prob.validate()?;
    let m = prob.num_vars();
    let n = prob.order;
    let mut z = prob.start.clone();
    if barrier_value(prob, &z, 1.0).is_none() {
        return Err(MelError::Contract("barrier start point is not strictly feasible".into()));
    }
    let ws = Workspace::new(prob);
    let nonneg_count = prob.nonneg.iter().filter(|&&b| b).count();

    let mut t = params.initial_t;
    let mut outer = Vec::new();
    let mut newton_total = 0;
    loop {
        newton_total += center(prob, &ws, &mut z, t, params)?;
        outer.push(prob.objective_value(&z));
        let gap = (n + nonneg_count) as f64 / t;
        if gap <= params.gap_tol {
            let mat = prob.matrix(&z);
            let min_eig = min_eigenvalue(&mat, 1e-9)?;
            debug_assert!(m == z.len());
            return Ok(LmiSolution {
                objective: prob.objective_value(&z),
                z,
                min_eigenvalue: min_eig,
                outer_objectives: outer,
                newton_iterations: newton_total,
                gap_bound: gap,
            });
        }
        t *= params.growth;
    }
}

fn center(prob: &LmiProblem, ws: &Workspace, z: &mut [f64], t: f64, params: &BarrierParams) -> Result<usize> {
    let m = prob.num_vars();
    for iter in 0..params.max_newton {
        let mat = prob.matrix(z);
        let chol = Cholesky::new(&mat)
            .ok_or_else(|| MelError::Numerical("iterate left the PSD cone".into()))?;
        let w = chol.inverse();

        let mut grad = vec![0.0; m];
        // Hessian entries are tr(W M_i W M_j); W M_i W is only needed on the
        // positions some M_j touches.
        let mut g = vec![vec![0.0; ws.pattern.len()]; m];
        for i in 0..m {
            let mut tr = 0.0;
            for &(p, q, v) in &ws.expanded[i] {
                tr += v * w[(q, p)];
                for (gk, &(a, b)) in g[i].iter_mut().zip(&ws.pattern) {
                    *gk += v * w[(a, p)] * w[(q, b)];
                }
            }
            grad[i] = t * prob.objective[i] + tr;
            if prob.nonneg[i] {
                grad[i] += 1.0 / z[i];
            }
        }
        let mut hess = Matrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                let h: f64 = ws.weights[j].iter().map(|&(k, u)| u * g[i][k]).sum();
                hess[(i, j)] = h;
                hess[(j, i)] = h;
            }
            if prob.nonneg[i] {
                hess[(i, i)] += 1.0 / (z[i] * z[i]);
            }
        }
        let hchol = match Cholesky::new(&hess) {
            Some(c) => c,
            None => {
                let ridge = 1e-12 * (1.0 + hess.max_abs());
                for i in 0..m {
                    hess[(i, i)] += ridge;
                }
                Cholesky::new(&hess).ok_or_else(|| MelError::Numerical("singular Newton system".into()))?
            }
        };
        let step = hchol.solve(&grad);
        let dec2: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        if !dec2.is_finite() {
            return Err(MelError::Numerical("non-finite Newton decrement".into()));
        }
        if dec2 / 2.0 <= params.newton_tol {
            return Ok(iter);
        }

        let phi0 = barrier_value(prob, z, t).expect("current iterate is interior");
        let step_norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut s = 1.0;
        let mut trial = vec![0.0; m];
        loop {
            for k in 0..m {
                trial[k] = z[k] + s * step[k];
            }
            if let Some(phi) = barrier_value(prob, &trial, t) {
                if phi >= phi0 + 0.25 * s * dec2 {
                    break;
                }
            }
            s *= 0.5;
            if s * step_norm < params.min_step {
                // Rounding floor: once the decrement is below what f64 can resolve in the
                // barrier value, the iterate is centered as far as arithmetic allows.
                if dec2 < 1e-6 || dec2 < 1e3 * f64::EPSILON * phi0.abs() {
                    return Ok(iter);
                }
                return Err(MelError::NonConvergence {
                    reason: "Newton line search stalled".into(),
                    iterations: iter,
                    residual: dec2,
                    last_iterate: z.to_vec(),
                });
            }
        }
        z.copy_from_slice(&trial);
        let obj = prob.objective_value(z);
        if obj > params.objective_cap || z.iter().any(|v| v.abs() > params.objective_cap) {
            return Err(MelError::Unbounded { cap: params.objective_cap });
        }
    }
    Err(MelError::NonConvergence {
        reason: "centering exceeded the Newton iteration limit".into(),
        iterations: params.max_newton,
        residual: f64::NAN,
        last_iterate: z.to_vec(),
    })
}
