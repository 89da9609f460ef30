//! Task allocation and simulation for asynchronous mobile edge learning.
//!
//! An orchestrator splits `d` samples over `K` heterogeneous learners and
//! decides how many local updates each one runs per global cycle, subject to
//! a cycle deadline, per-learner energy caps, and a cap on the spread of
//! update counts (staleness).

pub mod async_sai;
pub mod cost_model;
pub mod error;
pub mod instances;
pub mod learn_core;
pub mod mel_sim;
pub mod problem;
pub mod sdp_kernel;
pub mod sync_relax;

pub use cost_model::{CostCoeffs, LearnerProfile, SystemParams, TransferMode};
pub use error::{MelError, Result};
pub use problem::{AllocationProblem, AsyncProblem};
pub use async_sai::{Allocation, Scheme};
