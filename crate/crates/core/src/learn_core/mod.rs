//! Gradient-descent learners used by the simulator, and the local-vs-central
//! divergence bound checker.

mod backend;
mod data;
mod divergence;

pub use backend::{local_loss, local_update, Backend, LinearRegression, Mlp};
pub use data::{
    class_centres, classification_from, generate, regression_from, synthetic_classification, synthetic_regression,
    Dataset, DatasetKind, DatasetSpec,
};
pub use divergence::{
    check_divergence, divergence_bound, estimate_beta, estimate_delta, DivergenceReport, DivergenceStep,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MelError, Result};

/// Backend picked at run time from a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnyBackend {
    Linear(LinearRegression),
    Mlp(Mlp),
}

impl Backend for AnyBackend {
    fn name(&self) -> &'static str {
        match self {
            AnyBackend::Linear(b) => b.name(),
            AnyBackend::Mlp(b) => b.name(),
        }
    }

    fn num_params(&self) -> usize {
        match self {
            AnyBackend::Linear(b) => b.num_params(),
            AnyBackend::Mlp(b) => b.num_params(),
        }
    }

    fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            AnyBackend::Linear(b) => b.init(rng),
            AnyBackend::Mlp(b) => b.init(rng),
        }
    }

    fn loss(&self, w: &[f64], data: &Dataset) -> f64 {
        match self {
            AnyBackend::Linear(b) => b.loss(w, data),
            AnyBackend::Mlp(b) => b.loss(w, data),
        }
    }

    fn gradient(&self, w: &[f64], data: &Dataset) -> Vec<f64> {
        match self {
            AnyBackend::Linear(b) => b.gradient(w, data),
            AnyBackend::Mlp(b) => b.gradient(w, data),
        }
    }

    fn accuracy(&self, w: &[f64], data: &Dataset) -> Option<f64> {
        match self {
            AnyBackend::Linear(b) => b.accuracy(w, data),
            AnyBackend::Mlp(b) => b.accuracy(w, data),
        }
    }
}

/// Parameters plus the learning rate they are trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub w: Vec<f64>,
    pub backend: AnyBackend,
    pub eta: f64,
}

impl ModelState {
    pub fn new(w: Vec<f64>, backend: AnyBackend, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(MelError::InvalidInput(format!("learning rate must be in (0, 1), got {eta}")));
        }
        if w.len() != backend.num_params() {
            return Err(MelError::Contract(format!(
                "{} parameters for a {} model with {}",
                w.len(),
                backend.name(),
                backend.num_params()
            )));
        }
        Ok(Self { w, backend, eta })
    }
}
