//! Time and energy cost model for one global cycle.
//!
//! Every learner's cycle is reduced to two quadratic forms in the number of
//! local updates `tau` and the batch size `d`:
//!
//! ```text
//! time   = c2 * tau * d + c1 * d + c0
//! energy = g2 * tau * d + g1 * d + g0
//! ```
//!
//! The coefficients come from the radio link (Shannon rate), the model and
//! data payload sizes, and the learner's processor.

use serde::{Deserialize, Serialize};

use crate::error::{MelError, Result};

/// Whether the orchestrator ships data batches (PL) or only models (FL).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferMode {
    #[serde(rename = "PL")]
    Parallelized,
    #[serde(rename = "FL")]
    Federated,
}

/// Global radio and model constants shared by every learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// Channel bandwidth W in Hz.
    pub bandwidth_hz: f64,
    /// Noise power spectral density N0 in W/Hz.
    pub noise_density_w_per_hz: f64,
    /// Processor cycles per sample per local update.
    pub model_complexity: f64,
    /// Model size in parameters.
    pub model_size: f64,
    /// Extra model parameters per allocated sample (0 for pure data parallelism).
    pub data_model_factor: f64,
    /// Bits per model parameter.
    pub precision_model_bits: f64,
    /// Bits per feature value.
    pub precision_data_bits: f64,
    /// Features per sample.
    pub feature_count: f64,
    /// Effective chip capacitance.
    pub chip_capacitance: f64,
    /// Exponent of the frequency term in the compute energy.
    pub compute_exponent: f64,
    /// Frequency unit (in Hz) used inside the compute-energy term; 1e9 evaluates it in GHz.
    pub energy_freq_unit_hz: f64,
    pub transfer_mode: TransferMode,
}

/// Parameter count of the 784-300-124-60-10 fully connected network.
pub const REFERENCE_MODEL_SIZE: f64 = 280_934.0;

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 5.0e6,
            noise_density_w_per_hz: dbm_to_watts(-174.0),
            model_complexity: 6.0 * REFERENCE_MODEL_SIZE,
            model_size: REFERENCE_MODEL_SIZE,
            data_model_factor: 0.0,
            precision_model_bits: 32.0,
            precision_data_bits: 8.0,
            feature_count: 784.0,
            chip_capacitance: 1e-11,
            compute_exponent: 2.0,
            energy_freq_unit_hz: 1e9,
            transfer_mode: TransferMode::Parallelized,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(MelError::InvalidInput(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("noise_density_w_per_hz", self.noise_density_w_per_hz)?;
        positive("model_complexity", self.model_complexity)?;
        positive("model_size", self.model_size)?;
        positive("precision_model_bits", self.precision_model_bits)?;
        positive("precision_data_bits", self.precision_data_bits)?;
        positive("feature_count", self.feature_count)?;
        positive("chip_capacitance", self.chip_capacitance)?;
        positive("energy_freq_unit_hz", self.energy_freq_unit_hz)?;
        if !(self.data_model_factor.is_finite() && self.data_model_factor >= 0.0) {
            return Err(MelError::InvalidInput(format!(
                "data_model_factor must be >= 0, got {}",
                self.data_model_factor
            )));
        }
        if !(self.compute_exponent.is_finite() && self.compute_exponent >= 1.0) {
            return Err(MelError::InvalidInput(format!(
                "compute_exponent must be >= 1, got {}",
                self.compute_exponent
            )));
        }
        Ok(())
    }

    /// Bits shipped per sample in PL mode (zero in FL mode).
    fn data_bits_per_sample(&self) -> f64 {
        match self.transfer_mode {
            TransferMode::Parallelized => self.feature_count * self.precision_data_bits,
            TransferMode::Federated => 0.0,
        }
    }
}

/// Per-learner physical profile as reported to the orchestrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerProfile {
    pub id: usize,
    pub cpu_freq_hz: f64,
    pub tx_power_w: f64,
    /// Linear channel power gain towards the orchestrator.
    pub channel_gain: f64,
    /// Energy cap for one global cycle in joules.
    pub energy_cap_j: f64,
}

impl LearnerProfile {
    pub fn validate(&self) -> Result<()> {
        positive("cpu_freq_hz", self.cpu_freq_hz)?;
        positive("tx_power_w", self.tx_power_w)?;
        positive("channel_gain", self.channel_gain)?;
        positive("energy_cap_j", self.energy_cap_j)
    }
}

/// Quadratic time and energy coefficients of one learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCoeffs {
    /// Seconds per sample per update.
    pub c2: f64,
    /// Seconds per sample (transfer).
    pub c1: f64,
    /// Seconds of fixed model exchange.
    pub c0: f64,
    /// Joules per sample per update.
    pub g2: f64,
    /// Joules per sample (upload).
    pub g1: f64,
    /// Joules of fixed model upload.
    pub g0: f64,
}

impl CostCoeffs {
    pub fn from_profile(profile: &LearnerProfile, sys: &SystemParams) -> Self {
        let (c2, c1, c0) = time_coeffs(profile, sys);
        let (g2, g1, g0) = energy_coeffs(profile, sys);
        Self { c2, c1, c0, g2, g1, g0 }
    }

    pub fn predict_time(&self, tau: f64, d: f64) -> f64 {
        self.c2 * tau * d + self.c1 * d + self.c0
    }

    pub fn predict_energy(&self, tau: f64, d: f64) -> f64 {
        self.g2 * tau * d + self.g1 * d + self.g0
    }

    /// Largest batch that fits both budgets when performing `tau` updates.
    ///
    /// Infinite when neither budget depends on the batch size.
    pub fn max_batch(&self, tau: f64, t_max: f64, e_max: f64) -> f64 {
        let per_time = self.c2 * tau + self.c1;
        let per_energy = self.g2 * tau + self.g1;
        let by_time = if per_time > 0.0 { (t_max - self.c0) / per_time } else { f64::INFINITY };
        let by_energy = if per_energy > 0.0 { (e_max - self.g0) / per_energy } else { f64::INFINITY };
        by_time.min(by_energy)
    }

    /// Largest number of updates that fits both budgets with batch `d`.
    ///
    /// Infinite for an empty batch, negative when even `tau = 0` overflows a budget.
    pub fn max_updates(&self, d: f64, t_max: f64, e_max: f64) -> f64 {
        if d <= 0.0 {
            return if self.c0 <= t_max && self.g0 <= e_max { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        let by_time = (t_max - self.c0 - self.c1 * d) / (self.c2 * d);
        let by_energy = (e_max - self.g0 - self.g1 * d) / (self.g2 * d);
        by_time.min(by_energy)
    }
}

/// Per-phase costs of one learner, in the order the cycle executes them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCosts {
    /// Orchestrator to learner: model plus (PL) the batch.
    pub send_s: f64,
    pub compute_s_per_update: f64,
    pub compute_j_per_update: f64,
    /// Learner to orchestrator: updated model.
    pub report_s: f64,
    pub report_j: f64,
}

impl PhaseCosts {
    pub fn total_time(&self, tau: f64) -> f64 {
        self.send_s + tau * self.compute_s_per_update + self.report_s
    }

    pub fn total_energy(&self, tau: f64) -> f64 {
        tau * self.compute_j_per_update + self.report_j
    }
}

pub fn phase_costs(profile: &LearnerProfile, sys: &SystemParams, d: f64) -> PhaseCosts {
    let rate = achievable_rate(profile, sys);
    let model_bits = sys.precision_model_bits * (d * sys.data_model_factor + sys.model_size);
    let data_bits = d * sys.data_bits_per_sample();
    let freq = profile.cpu_freq_hz / sys.energy_freq_unit_hz;
    PhaseCosts {
        send_s: (model_bits + data_bits) / rate,
        compute_s_per_update: d * sys.model_complexity / profile.cpu_freq_hz,
        compute_j_per_update: sys.chip_capacitance
            * d
            * sys.model_complexity
            * freq.powf(sys.compute_exponent - 1.0),
        report_s: model_bits / rate,
        report_j: profile.tx_power_w * model_bits / rate,
    }
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

/// Linear gain of the `128 + 37.1 log10(R[km])` dB attenuation model.
pub fn path_loss_gain(distance_m: f64) -> Result<f64> {
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(MelError::InvalidInput(format!(
            "distance must be finite and > 0 m, got {distance_m}"
        )));
    }
    let attenuation_db = 128.0 + 37.1 * (distance_m / 1000.0).log10();
    Ok(10f64.powf(-attenuation_db / 10.0))
}

/// Shannon rate in bits/s with total in-band noise `N0 * W`.
pub fn achievable_rate(profile: &LearnerProfile, sys: &SystemParams) -> f64 {
    let snr = profile.tx_power_w * profile.channel_gain / (sys.noise_density_w_per_hz * sys.bandwidth_hz);
    sys.bandwidth_hz * (1.0 + snr).log2()
}

pub fn time_coeffs(profile: &LearnerProfile, sys: &SystemParams) -> (f64, f64, f64) {
    let rate = achievable_rate(profile, sys);
    let c2 = sys.model_complexity / profile.cpu_freq_hz;
    let c1 = (sys.data_bits_per_sample() + 2.0 * sys.precision_model_bits * sys.data_model_factor) / rate;
    let c0 = 2.0 * sys.precision_model_bits * sys.model_size / rate;
    (c2, c1, c0)
}

pub fn energy_coeffs(profile: &LearnerProfile, sys: &SystemParams) -> (f64, f64, f64) {
    let rate = achievable_rate(profile, sys);
    let freq = profile.cpu_freq_hz / sys.energy_freq_unit_hz;
    let g2 = sys.chip_capacitance * sys.model_complexity * freq.powf(sys.compute_exponent - 1.0);
    let g1 = profile.tx_power_w * sys.precision_model_bits * sys.data_model_factor / rate;
    let g0 = profile.tx_power_w * sys.precision_model_bits * sys.model_size / rate;
    (g2, g1, g0)
}

pub fn predict_time(coeffs: &CostCoeffs, tau: f64, d: f64) -> f64 {
    coeffs.predict_time(tau, d)
}

pub fn predict_energy(coeffs: &CostCoeffs, tau: f64, d: f64) -> f64 {
    coeffs.predict_energy(tau, d)
}
