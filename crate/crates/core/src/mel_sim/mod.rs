//! Virtual-time simulation of the orchestrator/learner protocol: every
//! global cycle the orchestrator solves the allocation, ships models (and in
//! PL mode data), learners run their local updates, report back, and the
//! orchestrator aggregates.

mod scenario;

pub use scenario::{BackendKind, ScenarioSpec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::async_sai::{check_allocation, solve_scheme, SaiOptions, SchemeOutcome};
use crate::cost_model::{phase_costs, LearnerProfile, TransferMode};
use crate::error::{MelError, Result};
use crate::instances::draw_profiles;
use crate::learn_core::{
    class_centres, classification_from, local_update, regression_from, AnyBackend, Backend, Dataset, DatasetKind,
    LinearRegression, Mlp,
};
use crate::problem::{AllocationProblem, AsyncProblem};

const STREAM_PLACEMENT: u64 = 0;
const STREAM_DATA: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_INIT: u64 = 3;
/// Learner `k` draws its private FL pool from stream `STREAM_POOL_BASE + k`.
const STREAM_POOL_BASE: u64 = 16;

/// Relative slack when comparing modeled costs with the budgets.
const BUDGET_RTOL: f64 = 1e-9;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Learner placement, processor classes and energy caps for a scenario.
pub fn generate_learners(spec: &ScenarioSpec, seed: u64) -> Vec<LearnerProfile> {
    draw_profiles(&mut stream(seed, STREAM_PLACEMENT), spec.learners, &spec.population())
}

/// Weighted mean `sum d_k w_k / sum d_k`.
pub fn aggregate_models(models: &[Vec<f64>], d: &[u64]) -> Result<Vec<f64>> {
    if models.len() != d.len() || models.is_empty() {
        return Err(MelError::Contract(format!("{} models but {} sample counts", models.len(), d.len())));
    }
    let dim = models[0].len();
    if models.iter().any(|m| m.len() != dim) {
        return Err(MelError::Contract("models differ in dimension".into()));
    }
    let total: u64 = d.iter().sum();
    if total == 0 {
        return Err(MelError::InvalidInput("aggregation needs at least one sample".into()));
    }
    let mut w = vec![0.0; dim];
    for (m, &dk) in models.iter().zip(d) {
        if dk == 0 {
            continue;
        }
        let a = dk as f64 / total as f64;
        for (wi, mi) in w.iter_mut().zip(m) {
            *wi += a * mi;
        }
    }
    Ok(w)
}

/// What one learner did in one cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerCycle {
    pub tau: u64,
    /// Allocated batch.
    pub d: u64,
    /// Samples actually trained on (smaller than `d` only when an FL pool runs dry).
    pub used: u64,
    pub time_s: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleLedger {
    /// 1-based cycle index.
    pub cycle: usize,
    pub learners: Vec<LearnerCycle>,
    /// Virtual clock at the aggregation that closes this cycle.
    pub aggregation_time_s: f64,
    /// Loss of the aggregated model on the held-out set.
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub staleness: u64,
    /// Mean `tau` of the allocation.
    pub objective: f64,
    pub dual_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CycleBudget,
    Threshold,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Infeasible,
    NonConvergence,
    Other,
}

impl FailureKind {
    pub fn of(err: &MelError) -> Self {
        match err {
            e if e.is_infeasible() => FailureKind::Infeasible,
            MelError::NonConvergence { .. } | MelError::Unbounded { .. } => FailureKind::NonConvergence,
            _ => FailureKind::Other,
        }
    }
}

/// Error that aborted a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimFailure {
    pub cycle: usize,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub scenario: String,
    pub profiles: Vec<LearnerProfile>,
    pub initial_loss: f64,
    pub initial_accuracy: Option<f64>,
    pub ledgers: Vec<CycleLedger>,
    pub stop: StopReason,
    pub failure: Option<SimFailure>,
    /// First cycle whose aggregated model met the threshold.
    pub cycles_to_threshold: Option<usize>,
}

impl SimTrace {
    pub fn final_loss(&self) -> f64 {
        self.ledgers.last().map_or(self.initial_loss, |l| l.loss)
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.ledgers.last().map_or(self.initial_accuracy, |l| l.accuracy)
    }

    /// Loss after each cycle, starting with the initial model.
    pub fn loss_curve(&self) -> Vec<f64> {
        std::iter::once(self.initial_loss).chain(self.ledgers.iter().map(|l| l.loss)).collect()
    }

    /// First cycle at which the loss is at or below `threshold`.
    pub fn cycles_to_loss(&self, threshold: f64) -> Option<usize> {
        self.ledgers.iter().find(|l| l.loss <= threshold).map(|l| l.cycle)
    }
}

/// Draws fresh samples from the scenario's data distribution.
#[derive(Debug, Clone)]
enum Source {
    Regression { w: Vec<f64>, noise: f64 },
    Classification { centres: Vec<Vec<f64>>, spread: f64 },
}

impl Source {
    fn draw(&self, rng: &mut ChaCha8Rng, n: usize) -> Dataset {
        match self {
            Source::Regression { w, noise } => regression_from(rng, n, w, *noise),
            Source::Classification { centres, spread } => classification_from(rng, n, centres, *spread),
        }
    }
}

/// Private FL pool of one learner, grown on demand up to its cap.
#[derive(Debug, Clone)]
struct Pool {
    data: Dataset,
    rng: ChaCha8Rng,
}

/// Simulation state between cycles.
pub struct Simulator {
    spec: ScenarioSpec,
    profiles: Vec<LearnerProfile>,
    problem: AsyncProblem,
    opts: SaiOptions,
    backend: AnyBackend,
    source: Source,
    /// PL: the orchestrator's dataset of `d` samples.
    central: Option<Dataset>,
    /// FL: one pool per learner.
    pools: Vec<Pool>,
    validation: Dataset,
    shuffle: ChaCha8Rng,
    model: Vec<f64>,
    clock_s: f64,
    cycle: usize,
}

impl Simulator {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let seed = spec.seed;
        let profiles = generate_learners(spec, seed);
        let base = AllocationProblem::from_profiles(
            &profiles,
            &spec.system,
            spec.deadline_s,
            spec.total_batch,
            spec.batch_floor,
        );
        let problem = AsyncProblem::new(base, spec.staleness);
        let ds = &spec.dataset;
        let backend = match spec.backend {
            BackendKind::Linear => AnyBackend::Linear(LinearRegression { features: ds.features }),
            BackendKind::Mlp => AnyBackend::Mlp(Mlp { inputs: ds.features, hidden: spec.hidden_units, classes: ds.classes }),
        };

        let mut data_rng = stream(seed, STREAM_DATA);
        let source = match ds.kind {
            DatasetKind::Regression => {
                let w = (0..ds.features).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut data_rng)).collect();
                Source::Regression { w, noise: ds.noise }
            }
            DatasetKind::Classification => Source::Classification {
                centres: class_centres(&mut data_rng, ds.classes, ds.features, ds.separation),
                spread: ds.noise,
            },
        };
        let validation = source.draw(&mut data_rng, ds.validation.max(1));
        let (central, pools) = match spec.system.transfer_mode {
            TransferMode::Parallelized => (Some(source.draw(&mut data_rng, spec.total_batch as usize)), Vec::new()),
            TransferMode::Federated => {
                let pools = (0..spec.learners)
                    .map(|k| {
                        let rng = stream(seed, STREAM_POOL_BASE + k as u64);
                        Pool { data: source.draw(&mut rng.clone(), 0), rng }
                    })
                    .collect();
                (None, pools)
            }
        };
        let model = backend.init(&mut stream(seed, STREAM_INIT));
        Ok(Self {
            spec: spec.clone(),
            profiles,
            problem,
            opts: SaiOptions { use_sdp: spec.use_sdp, ..SaiOptions::default() },
            backend,
            source,
            central,
            pools,
            validation,
            shuffle: stream(seed, STREAM_SHUFFLE),
            model,
            clock_s: 0.0,
            cycle: 0,
        })
    }

    pub fn profiles(&self) -> &[LearnerProfile] {
        &self.profiles
    }

    pub fn problem(&self) -> &AsyncProblem {
        &self.problem
    }

    pub fn model(&self) -> &[f64] {
        &self.model
    }

    pub fn validation(&self) -> &Dataset {
        &self.validation
    }

    /// Loss and accuracy of the current global model on the held-out set.
    pub fn evaluate(&self) -> (f64, Option<f64>) {
        (self.backend.loss(&self.model, &self.validation), self.backend.accuracy(&self.model, &self.validation))
    }

    /// Solves the allocation for the current cycle under the scenario's scheme.
    pub fn allocate(&self) -> Result<SchemeOutcome> {
        solve_scheme(&self.problem, self.spec.scheme, &self.opts)
    }

    /// Per-learner training batches for this cycle.
    fn batches(&mut self, d: &[u64]) -> Vec<Dataset> {
        if let Some(central) = &self.central {
            let mut idx: Vec<usize> = (0..central.len()).collect();
            idx.shuffle(&mut self.shuffle);
            let mut start = 0;
            return d
                .iter()
                .map(|&dk| {
                    let part = central.subset(&idx[start..start + dk as usize]);
                    start += dk as usize;
                    part
                })
                .collect();
        }
        let cap = self.spec.fl_pool_size.unwrap_or(u64::MAX);
        let mut out = Vec::with_capacity(d.len());
        for (pool, &dk) in self.pools.iter_mut().zip(d) {
            let want = dk.min(cap) as usize;
            if pool.data.len() < want {
                let extra = self.source.draw(&mut pool.rng, want - pool.data.len());
                pool.data = Dataset::concat(&[&pool.data, &extra]).expect("same shape");
            }
            let mut idx: Vec<usize> = (0..pool.data.len()).collect();
            idx.shuffle(&mut self.shuffle);
            idx.truncate(want);
            out.push(pool.data.subset(&idx));
        }
        out
    }

    /// One global cycle: allocate, ship, train, report, aggregate.
    pub fn run_global_cycle(&mut self) -> Result<CycleLedger> {
        let outcome = self.allocate()?;
        let alloc = &outcome.allocation;
        let broken = check_allocation(&self.problem, alloc);
        if !broken.is_empty() {
            return Err(MelError::Contract(format!("allocator returned an invalid allocation: {}", broken.join("; "))));
        }
        let base = &self.problem.base;
        let k = base.num_learners();
        let mut learners = Vec::with_capacity(k);
        for i in 0..k {
            let (tau, d) = (alloc.tau[i], alloc.d[i]);
            let phases = phase_costs(&self.profiles[i], &self.spec.system, d as f64);
            let time_s = phases.total_time(tau as f64);
            let energy_j = phases.total_energy(tau as f64);
            if time_s > base.deadline_s * (1.0 + BUDGET_RTOL) {
                return Err(MelError::Contract(format!("learner {i}: modeled time {time_s} s exceeds T")));
            }
            if energy_j > base.energy_caps_j[i] * (1.0 + BUDGET_RTOL) {
                return Err(MelError::Contract(format!("learner {i}: modeled energy {energy_j} J exceeds its cap")));
            }
            learners.push(LearnerCycle { tau, d, used: 0, time_s, energy_j });
        }

        let batches = self.batches(&alloc.d);
        let mut models = Vec::with_capacity(k);
        let mut weights = Vec::with_capacity(k);
        for (i, batch) in batches.iter().enumerate() {
            let mut w = self.model.clone();
            if !batch.is_empty() {
                for _ in 0..alloc.tau[i] {
                    w = local_update(&self.backend, &w, batch, self.spec.learning_rate)?;
                }
            }
            learners[i].used = batch.len() as u64;
            models.push(w);
            weights.push(batch.len() as u64);
        }
        if weights.iter().any(|&w| w > 0) {
            self.model = aggregate_models(&models, &weights)?;
        }

        self.cycle += 1;
        self.clock_s += learners.iter().map(|l| l.time_s).fold(0.0, f64::max);
        let (loss, accuracy) = self.evaluate();
        Ok(CycleLedger {
            cycle: self.cycle,
            learners,
            aggregation_time_s: self.clock_s,
            loss,
            accuracy,
            staleness: alloc.staleness,
            objective: alloc.objective,
            dual_bound: outcome.dual_bound,
        })
    }

    fn threshold_met(&self, loss: f64, acc: Option<f64>) -> bool {
        let by_loss = self.spec.loss_threshold.is_some_and(|t| loss <= t);
        let by_acc = matches!((self.spec.accuracy_threshold, acc), (Some(t), Some(a)) if a >= t);
        by_loss || by_acc
    }

    /// Runs up to `G` cycles. A failing cycle aborts the run and is recorded
    /// in the trace rather than returned as an error.
    pub fn run(mut self) -> SimTrace {
        let (initial_loss, initial_accuracy) = self.evaluate();
        let mut ledgers = Vec::with_capacity(self.spec.cycles);
        let mut stop = StopReason::CycleBudget;
        let mut failure = None;
        let mut cycles_to_threshold = None;
        for g in 1..=self.spec.cycles {
            match self.run_global_cycle() {
                Ok(ledger) => {
                    let met = self.threshold_met(ledger.loss, ledger.accuracy);
                    ledgers.push(ledger);
                    if met && cycles_to_threshold.is_none() {
                        cycles_to_threshold = Some(g);
                        if self.spec.stop_at_threshold {
                            stop = StopReason::Threshold;
                            break;
                        }
                    }
                }
                Err(e) => {
                    failure = Some(SimFailure { cycle: g, kind: FailureKind::of(&e), message: e.to_string() });
                    stop = StopReason::Aborted;
                    break;
                }
            }
        }
        SimTrace {
            scenario: self.spec.id.clone(),
            profiles: self.profiles,
            initial_loss,
            initial_accuracy,
            ledgers,
            stop,
            failure,
            cycles_to_threshold,
        }
    }
}

/// Builds the simulator and runs the whole scenario.
pub fn run_experiment(spec: &ScenarioSpec) -> Result<SimTrace> {
    Ok(Simulator::new(spec)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregation_examples() {
        let w = aggregate_models(&[vec![1.0, -2.0]], &[7]).unwrap();
        assert_eq!(w, vec![1.0, -2.0]);
        let w = aggregate_models(&[vec![1.5, -3.0], vec![-1.5, 3.0]], &[4, 4]).unwrap();
        assert!(w.iter().all(|v| v.abs() < 1e-15));
        assert!(aggregate_models(&[vec![1.0], vec![1.0, 2.0]], &[1, 1]).is_err());
        assert!(aggregate_models(&[vec![1.0]], &[0]).is_err());
    }
}
