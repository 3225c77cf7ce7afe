//! Closed-form network lifetime.
//!
//! Lifetime is the energy drained by the time the first node dies divided by
//! the energy drained per step. Without congestion every node spends
//! `rho * tau0 * dE` per step; under absolute congestion every node spends
//! `C * dE`. The unified form `T = k * E0 / (Omega * dE)` with
//! `Omega = min(rho * tau0, C)` covers both, the factor `k` absorbing
//! whatever the two limits leave out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Inputs of the lifetime model for one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeInputs {
    pub init_energy: f64,
    pub hop_cost: f64,
    pub capacity: f64,
    pub gen_rate: f64,
    pub tau0: f64,
    pub energy_range_at_death: f64,
    pub n_nodes: usize,
    pub avg_deliveries_per_step: f64,
}

impl LifetimeInputs {
    pub fn omega(&self) -> f64 {
        omega(self.gen_rate, self.tau0, self.capacity)
    }
}

/// Effective per-node hop throughput `min(rho * tau0, C)`.
pub fn omega(gen_rate: f64, tau0: f64, capacity: f64) -> f64 {
    (gen_rate * tau0).min(capacity)
}

/// `T = (E_total(0) - E_total(T)) / (D * dE)`.
pub fn predict_general(e_total_0: f64, e_total_t: f64, deliveries_per_step: f64, hop_cost: f64) -> Result<f64> {
    positive("deliveries per step", deliveries_per_step)?;
    positive("hop cost", hop_cost)?;
    if !(e_total_0 >= e_total_t && e_total_t >= 0.0) {
        return Err(Error::Domain(format!(
            "need E_total(0) >= E_total(T) >= 0, got {e_total_0} and {e_total_t}"
        )));
    }
    Ok((e_total_0 - e_total_t) / (deliveries_per_step * hop_cost))
}

/// Free-flow lifetime `(E0 - R(T)/2) / (rho * tau0 * dE)`.
pub fn predict_no_congestion(
    init_energy: f64,
    range_at_death: f64,
    gen_rate: f64,
    tau0: f64,
    hop_cost: f64,
) -> Result<f64> {
    positive("rho * tau0", gen_rate * tau0)?;
    positive("hop cost", hop_cost)?;
    Ok((init_energy - range_at_death / 2.0) / (gen_rate * tau0 * hop_cost))
}

/// Absolute-congestion lifetime `E0 / (C * dE)`.
pub fn predict_absolute(init_energy: f64, capacity: f64, hop_cost: f64) -> Result<f64> {
    positive("initial energy", init_energy)?;
    positive("capacity", capacity)?;
    positive("hop cost", hop_cost)?;
    Ok(init_energy / (capacity * hop_cost))
}

/// Unified lifetime `k * E0 / (Omega * dE)`.
pub fn predict_unified(
    init_energy: f64,
    gen_rate: f64,
    tau0: f64,
    capacity: f64,
    hop_cost: f64,
    k: f64,
) -> Result<f64> {
    positive("initial energy", init_energy)?;
    positive("k", k)?;
    positive("hop cost", hop_cost)?;
    let om = omega(gen_rate, tau0, capacity);
    positive("Omega", om)?;
    Ok(k * init_energy / (om * hop_cost))
}

/// Inverts the unified formula: `k = T * Omega * dE / E0`.
pub fn extract_k(
    lifetime: f64,
    init_energy: f64,
    gen_rate: f64,
    tau0: f64,
    capacity: f64,
    hop_cost: f64,
) -> Result<f64> {
    positive("lifetime", lifetime)?;
    positive("initial energy", init_energy)?;
    positive("hop cost", hop_cost)?;
    let om = omega(gen_rate, tau0, capacity);
    positive("Omega", om)?;
    Ok(lifetime * om * hop_cost / init_energy)
}

/// The `k` that makes the unified formula equal the free-flow formula.
pub fn free_flow_k(init_energy: f64, range_at_death: f64) -> f64 {
    (init_energy - range_at_death / 2.0) / init_energy
}
