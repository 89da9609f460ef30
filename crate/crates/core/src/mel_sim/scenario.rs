use serde::{Deserialize, Serialize};

use crate::async_sai::Scheme;
use crate::cost_model::SystemParams;
use crate::error::{MelError, Result};
use crate::instances::{PopulationSpec, FREQ_CLASSES_HZ};
use crate::learn_core::{DatasetKind, DatasetSpec};

/// Which model trains on the synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Linear,
    Mlp,
}

/// Everything a simulation run depends on. The seed fixes learner placement,
/// energy jitter, data generation, shuffles and model initialisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default = "default_id")]
    pub id: String,
    /// Number of learners K.
    pub learners: usize,
    /// Cycle deadline T in seconds.
    pub deadline_s: f64,
    /// Mean per-cycle energy cap E in joules.
    pub mean_energy_j: f64,
    /// Samples allocated per cycle, d.
    pub total_batch: u64,
    #[serde(default = "default_jitter")]
    pub energy_jitter_j: f64,
    #[serde(default)]
    pub batch_floor: u64,
    /// Staleness cap c.
    #[serde(default)]
    pub staleness: u64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Global cycles G.
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_classes")]
    pub freq_classes_hz: Vec<f64>,
    #[serde(default)]
    pub class_weights: Vec<f64>,
    #[serde(default = "default_radius")]
    pub max_distance_m: f64,
    #[serde(default = "default_tx")]
    pub tx_power_dbm: f64,
    /// Private pool size per learner in FL mode; unlimited when absent.
    #[serde(default)]
    pub fl_pool_size: Option<u64>,
    /// Stop once the global loss reaches this value.
    #[serde(default)]
    pub loss_threshold: Option<f64>,
    /// Stop once held-out accuracy reaches this value.
    #[serde(default)]
    pub accuracy_threshold: Option<f64>,
    /// Keep running to `cycles` after a threshold is met when false.
    #[serde(default = "default_true")]
    pub stop_at_threshold: bool,
    #[serde(default = "default_eta")]
    pub learning_rate: f64,
    #[serde(default = "default_backend")]
    pub backend: BackendKind,
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    /// Solve the dual SDP in the suggest step.
    #[serde(default = "default_true")]
    pub use_sdp: bool,
    #[serde(default)]
    pub system: SystemParams,
    #[serde(default)]
    pub dataset: DatasetSpec,
}

fn default_id() -> String {
    "scenario".into()
}
fn default_jitter() -> f64 {
    2.5
}
fn default_scheme() -> Scheme {
    Scheme::HaAsyn
}
fn default_cycles() -> usize {
    12
}
fn default_classes() -> Vec<f64> {
    FREQ_CLASSES_HZ.to_vec()
}
fn default_radius() -> f64 {
    500.0
}
fn default_tx() -> f64 {
    23.0
}
fn default_eta() -> f64 {
    0.1
}
fn default_backend() -> BackendKind {
    BackendKind::Mlp
}
fn default_hidden() -> usize {
    16
}
fn default_true() -> bool {
    true
}

impl ScenarioSpec {
    /// Minimal scenario; every other field takes its default.
    pub fn new(learners: usize, deadline_s: f64, mean_energy_j: f64, total_batch: u64) -> Self {
        Self {
            id: default_id(),
            learners,
            deadline_s,
            mean_energy_j,
            total_batch,
            energy_jitter_j: default_jitter(),
            batch_floor: 0,
            staleness: 0,
            scheme: default_scheme(),
            cycles: default_cycles(),
            seed: 0,
            freq_classes_hz: default_classes(),
            class_weights: Vec::new(),
            max_distance_m: default_radius(),
            tx_power_dbm: default_tx(),
            fl_pool_size: None,
            loss_threshold: None,
            accuracy_threshold: None,
            stop_at_threshold: true,
            learning_rate: default_eta(),
            backend: default_backend(),
            hidden_units: default_hidden(),
            use_sdp: true,
            system: SystemParams::default(),
            dataset: DatasetSpec::default(),
        }
    }

    pub fn population(&self) -> PopulationSpec {
        PopulationSpec {
            freq_classes_hz: self.freq_classes_hz.clone(),
            class_weights: self.class_weights.clone(),
            max_distance_m: self.max_distance_m,
            tx_power_dbm: self.tx_power_dbm,
            mean_energy_j: self.mean_energy_j,
            energy_jitter_j: self.energy_jitter_j,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(MelError::InvalidInput(format!("{key}: {msg}")));
        if self.learners == 0 {
            return bad("learners", "must be >= 1".into());
        }
        if !(self.deadline_s.is_finite() && self.deadline_s > 0.0) {
            return bad("deadline_s", format!("must be > 0, got {}", self.deadline_s));
        }
        if !(self.mean_energy_j.is_finite() && self.mean_energy_j > 0.0) {
            return bad("mean_energy_j", format!("must be > 0, got {}", self.mean_energy_j));
        }
        if !(self.energy_jitter_j.is_finite() && self.energy_jitter_j >= 0.0 && self.energy_jitter_j < self.mean_energy_j) {
            return bad("energy_jitter_j", "must be in [0, mean_energy_j)".into());
        }
        if self.total_batch < self.learners as u64 {
            return bad("total_batch", format!("must be >= learners ({})", self.learners));
        }
        if self.batch_floor.saturating_mul(self.learners as u64) > self.total_batch {
            return bad("batch_floor", "floor times learners exceeds total_batch".into());
        }
        if self.cycles == 0 {
            return bad("cycles", "must be >= 1".into());
        }
        if self.freq_classes_hz.is_empty() || self.freq_classes_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return bad("freq_classes_hz", "needs at least one positive frequency".into());
        }
        if !self.class_weights.is_empty()
            && (self.class_weights.len() != self.freq_classes_hz.len() || self.class_weights.iter().any(|w| !(*w >= 0.0)))
        {
            return bad("class_weights", "must be empty or one nonnegative weight per class".into());
        }
        if !(self.max_distance_m.is_finite() && self.max_distance_m > 0.0) {
            return bad("max_distance_m", "must be > 0".into());
        }
        if !self.tx_power_dbm.is_finite() {
            return bad("tx_power_dbm", "must be finite".into());
        }
        if self.fl_pool_size == Some(0) {
            return bad("fl_pool_size", "must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return bad("learning_rate", format!("must be in (0, 1), got {}", self.learning_rate));
        }
        if self.loss_threshold.is_some_and(|t| !t.is_finite()) {
            return bad("loss_threshold", "must be finite".into());
        }
        if self.accuracy_threshold.is_some_and(|t| !(0.0..=1.0).contains(&t)) {
            return bad("accuracy_threshold", "must be in [0, 1]".into());
        }
        if self.hidden_units == 0 {
            return bad("hidden_units", "must be >= 1".into());
        }
        if self.staleness > crate::problem::AsyncProblem::MAX_STALENESS {
            return bad("staleness", "too large".into());
        }
        if self.backend == BackendKind::Mlp && self.dataset.kind == DatasetKind::Regression {
            return bad("backend", "the mlp backend needs a classification dataset".into());
        }
        if self.backend == BackendKind::Linear && self.dataset.kind == DatasetKind::Classification {
            return bad("backend", "the linear backend needs a regression dataset".into());
        }
        self.system.validate()?;
        self.dataset.validate()
    }
}
