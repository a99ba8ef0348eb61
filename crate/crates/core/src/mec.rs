//! Edge-computing delay model and infrastructure-cost knapsack.
//!
//! Each SBS hosts a MEC server that processes its UE's file in round-robin
//! slots, then sends the result on the downlink. The per-SBS total delay is
//! the knapsack weight; the latency budget `epsilon * D_th` is the capacity.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MecConfig {
    /// File size in bits.
    pub file_bits: f64,
    pub cpu_cycles_per_bit: f64,
    /// Server speed in cycles per second.
    pub server_speed: f64,
    /// Seconds per scheduling slot.
    pub slot_len: f64,
    /// Seconds available for the downlink transfer.
    pub tx_window: f64,
    /// Latency threshold `D_th` in seconds.
    pub delay_threshold: f64,
    /// Tolerated violation probability `epsilon`.
    pub tolerance: f64,
    /// Price of each SBS of the MNO.
    pub costs: Vec<f64>,
}

impl Default for MecConfig {
    fn default() -> Self {
        Self {
            file_bits: 100.0,
            cpu_cycles_per_bit: 15.0,
            server_speed: 20.0,
            slot_len: 0.9,
            tx_window: 1.0,
            delay_threshold: 0.001,
            tolerance: 0.3,
            costs: vec![50.0, 80.0, 200.0, 500.0, 800.0, 1000.0, 300.0, 400.0],
        }
    }
}

impl MecConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cpu_cycles_per_bit", self.cpu_cycles_per_bit),
            ("server_speed", self.server_speed),
            ("slot_len", self.slot_len),
            ("tx_window", self.tx_window),
            ("delay_threshold", self.delay_threshold),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.file_bits >= 0.0) || !self.file_bits.is_finite() {
            return Err(Error::Config("file_bits must be non-negative".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Config(format!(
                "tolerance {} not in (0, 1)",
                self.tolerance
            )));
        }
        if self.costs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::Config("costs must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceTime {
    pub slots: u64,
    pub seconds: f64,
}

/// Slots needed to process one file, `ceil(tau x / (s Q))`, and their duration.
pub fn service_delay(cfg: &MecConfig) -> ServiceTime {
    let ratio = cfg.cpu_cycles_per_bit * cfg.file_bits / (cfg.server_speed * cfg.slot_len);
    // absorb representation error so that exact multiples do not round up
    let slots = (ratio - ratio.abs() * 1e-12).ceil().max(0.0) as u64;
    ServiceTime {
        slots,
        seconds: slots as f64 * cfg.slot_len,
    }
}

/// Downlink delay `x / (R T_s)`. A zero rate makes the UE unservable and
/// yields `f64::INFINITY`.
pub fn downlink_delay(file_bits: f64, rate: f64, tx_window: f64) -> f64 {
    if file_bits == 0.0 {
        return 0.0;
    }
    if !(rate > 0.0) {
        return f64::INFINITY;
    }
    file_bits / (rate * tx_window)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayProfile {
    pub service: Vec<f64>,
    pub downlink: Vec<f64>,
    pub total: Vec<f64>,
}

impl DelayProfile {
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }
}

/// Per-SBS total delay `D_f = D_sm + D_dl`.
pub fn total_delay(service: &[f64], downlink: &[f64]) -> DelayProfile {
    assert_eq!(service.len(), downlink.len());
    DelayProfile {
        service: service.to_vec(),
        downlink: downlink.to_vec(),
        total: service.iter().zip(downlink).map(|(s, d)| s + d).collect(),
    }
}

/// Delay profile of an MNO's SBSs given their downlink rates.
pub fn delay_profile(cfg: &MecConfig, rates: &[f64]) -> DelayProfile {
    let service = service_delay(cfg).seconds;
    let downlink: Vec<f64> = rates
        .iter()
        .map(|&r| downlink_delay(cfg.file_bits, r, cfg.tx_window))
        .collect();
    total_delay(&vec![service; rates.len()], &downlink)
}

/// Knapsack weight capacity `epsilon * D_th`.
pub fn knapsack_capacity(cfg: &MecConfig) -> f64 {
    cfg.tolerance * cfg.delay_threshold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackSolution {
    /// Fraction of each SBS used, in input order.
    pub y: Vec<f64>,
    /// Total cost `sum c_f y_f`.
    pub total_cost: f64,
    /// Consumed weight `sum y_f D_f`.
    pub consumed: f64,
    /// Items in the order the greedy visited them.
    pub order: Vec<usize>,
}

/// Greedy fractional knapsack over SBSs.
///
/// Items are visited by ascending `c_f / D_f` (ties by index). Each item is
/// taken whole while its delay fits the residual capacity; the first item
/// that does not fit is taken fractionally to close the capacity and the
/// fill stops there. Items with infinite delay are never taken.
pub fn fractional_knapsack(
    costs: &[f64],
    delays: &[f64],
    capacity: f64,
) -> Result<KnapsackSolution> {
    if costs.len() != delays.len() {
        return Err(Error::Contract(format!(
            "{} costs but {} delays",
            costs.len(),
            delays.len()
        )));
    }
    if !(capacity >= 0.0) || !capacity.is_finite() {
        return Err(Error::Domain(format!(
            "capacity must be non-negative, got {capacity}"
        )));
    }
    if let Some(d) = delays.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::Domain(format!("delays must be positive, got {d}")));
    }
    if let Some(c) = costs.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
        return Err(Error::Domain(format!(
            "costs must be non-negative, got {c}"
        )));
    }

    let mut order: Vec<usize> = (0..costs.len())
        .filter(|&i| delays[i].is_finite())
        .collect();
    let ratio = |i: usize| costs[i] / delays[i];
    order.sort_by(|&a, &b| {
        ratio(a)
            .partial_cmp(&ratio(b))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut y = vec![0.0; costs.len()];
    let mut total_cost = 0.0;
    let mut consumed = 0.0;
    for &i in &order {
        let residual = capacity - consumed;
        if delays[i] <= residual {
            y[i] = 1.0;
            total_cost += costs[i];
            consumed += delays[i];
        } else {
            let mut frac = (residual / delays[i]).max(0.0);
            // keep y_f D_f <= residual under rounding
            while frac > 0.0 && frac * delays[i] > residual {
                frac = frac.next_down();
            }
            y[i] = frac;
            total_cost += costs[i] * y[i];
            consumed += y[i] * delays[i];
            break;
        }
    }
    Ok(KnapsackSolution {
        y,
        total_cost,
        consumed,
        order,
    })
}
