use serde::Serialize;

use super::backend::{local_update, Backend};
use super::data::Dataset;
use crate::error::{MelError, Result};
use crate::sdp_kernel::{Matrix, SymmetricEigen};

/// Smoothness constant of the mean squared loss: the largest eigenvalue of `(2/d) X^T X`.
pub fn estimate_beta(data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(MelError::InvalidInput("cannot estimate smoothness of an empty dataset".into()));
    }
    let f = data.num_features;
    let mut rows = vec![vec![0.0; f]; f];
    for i in 0..data.len() {
        let x = data.row(i);
        for a in 0..f {
            for b in a..f {
                rows[a][b] += x[a] * x[b];
            }
        }
    }
    let scale = 2.0 / data.len() as f64;
    for a in 0..f {
        for b in a..f {
            rows[a][b] *= scale;
            rows[b][a] = rows[a][b];
        }
    }
    let eig = SymmetricEigen::new(&Matrix::from_rows(&rows))?;
    Ok(eig.values.last().copied().unwrap_or(0.0).max(0.0))
}

/// `delta_k = max_w |grad F_k(w) - grad F(w)|` over the given points.
pub fn estimate_delta<B: Backend>(backend: &B, partitions: &[Dataset], union: &Dataset, points: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0f64; partitions.len()];
    for w in points {
        let global = backend.gradient(w, union);
        for (k, part) in partitions.iter().enumerate() {
            let local = backend.gradient(w, part);
            let diff = local.iter().zip(&global).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            out[k] = out[k].max(diff);
        }
    }
    out
}

/// `delta / beta * ((eta * beta + 1)^t - 1)`.
pub fn divergence_bound(delta: f64, beta: f64, eta: f64, t: u64) -> f64 {
    if t == 0 || delta == 0.0 {
        return 0.0;
    }
    let exp = i32::try_from(t).unwrap_or(i32::MAX);
    delta / beta * ((eta * beta + 1.0).powi(exp) - 1.0)
}

/// One local step compared against the auxiliary (centralised) trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceStep {
    pub interval: usize,
    pub learner: usize,
    /// Local step within the interval.
    pub step: u64,
    pub distance: f64,
    /// Bound indexed by steps since the last aggregation.
    pub bound_local: f64,
    /// Bound indexed on the auxiliary clock, which runs `max tau` steps per interval.
    pub bound_aux_clock: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    pub beta: f64,
    pub eta: f64,
    pub delta: Vec<f64>,
    pub steps: Vec<DivergenceStep>,
    /// Per interval: distance of the aggregated model to the auxiliary model
    /// after `max tau` steps, and the weighted sum of the learners' bounds at
    /// their own step counts. Informational.
    pub aggregate: Vec<(f64, f64)>,
    pub violations: usize,
}

/// Replays `intervals` global cycles with fixed update counts `tau` and
/// checks every local iterate against the auxiliary model started from the
/// same global model and run on the union of all partitions.
pub fn check_divergence<B: Backend>(
    backend: &B,
    partitions: &[Dataset],
    tau: &[u64],
    intervals: usize,
    eta: f64,
    beta: f64,
    w0: &[f64],
) -> Result<DivergenceReport> {
    let k = partitions.len();
    if k == 0 || tau.len() != k {
        return Err(MelError::Contract(format!("{} partitions but {} update counts", k, tau.len())));
    }
    if partitions.iter().any(Dataset::is_empty) {
        return Err(MelError::Contract("every partition needs data".into()));
    }
    if w0.len() != backend.num_params() {
        return Err(MelError::Contract("initial model has the wrong dimension".into()));
    }
    if !(beta > 0.0 && eta > 0.0) {
        return Err(MelError::InvalidInput("beta and eta must be positive".into()));
    }
    let refs: Vec<&Dataset> = partitions.iter().collect();
    let union = Dataset::concat(&refs)?;
    let tau_max = tau.iter().copied().max().unwrap_or(0);
    let sizes: Vec<f64> = partitions.iter().map(|p| p.len() as f64).collect();
    let total: f64 = sizes.iter().sum();

    // First pass: trajectories.
    let mut w = w0.to_vec();
    let mut aux_paths = Vec::with_capacity(intervals);
    let mut local_paths = Vec::with_capacity(intervals);
    for _ in 0..intervals {
        let mut aux = vec![w.clone()];
        for _ in 0..tau_max {
            let next = local_update(backend, aux.last().expect("nonempty"), &union, eta)?;
            aux.push(next);
        }
        let mut locals = Vec::with_capacity(k);
        for (i, part) in partitions.iter().enumerate() {
            let mut path = vec![w.clone()];
            for _ in 0..tau[i] {
                let next = local_update(backend, path.last().expect("nonempty"), part, eta)?;
                path.push(next);
            }
            locals.push(path);
        }
        let mut agg = vec![0.0; w.len()];
        for (i, path) in locals.iter().enumerate() {
            let last = path.last().expect("nonempty");
            for (a, v) in agg.iter_mut().zip(last) {
                *a += sizes[i] / total * v;
            }
        }
        w = agg;
        aux_paths.push(aux);
        local_paths.push(locals);
    }

    let mut points: Vec<Vec<f64>> = Vec::new();
    for (aux, locals) in aux_paths.iter().zip(&local_paths) {
        points.extend(aux.iter().cloned());
        for path in locals {
            points.extend(path.iter().cloned());
        }
    }
    let delta = estimate_delta(backend, partitions, &union, &points);

    let mut steps = Vec::new();
    let mut aggregate = Vec::with_capacity(intervals);
    let mut violations = 0;
    for (g, (aux, locals)) in aux_paths.iter().zip(&local_paths).enumerate() {
        for (i, path) in locals.iter().enumerate() {
            for (s, wl) in path.iter().enumerate() {
                let distance = norm_diff(wl, &aux[s]);
                let bound_local = divergence_bound(delta[i], beta, eta, s as u64);
                let shift = (g as u64) * (tau_max - tau[i]);
                let bound_aux_clock = divergence_bound(delta[i], beta, eta, s as u64 + shift);
                let violated = distance > bound_local * (1.0 + 1e-9) + 1e-12;
                if violated {
                    violations += 1;
                }
                steps.push(DivergenceStep {
                    interval: g,
                    learner: i,
                    step: s as u64,
                    distance,
                    bound_local,
                    bound_aux_clock,
                    violated,
                });
            }
        }
        let next = if g + 1 < aux_paths.len() { aux_paths[g + 1][0].clone() } else { w.clone() };
        let dist = norm_diff(&next, aux.last().expect("nonempty"));
        let weighted: f64 = (0..k).map(|i| sizes[i] / total * divergence_bound(delta[i], beta, eta, tau[i])).sum();
        aggregate.push((dist, weighted));
    }
    Ok(DivergenceReport { beta, eta, delta, steps, aggregate, violations })
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
