//! Domain types shared by every model: the inverter fleet, the scenario,
//! load schedules and scenario validation.
//!
//! Power quantities follow the net-injection sign convention of the power
//! balance `P_i = P_gen,i + P_load,i`: a load that consumes power has a
//! negative `p_load`. The scheduled imbalance of inverter `i` is
//! `P_0,i = P_ref,i + P_load,i`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use crate::error::{Error, Result, ValidationErrors};
use crate::network::NetworkModel;

/// Per-inverter constants.
#[derive(Debug, Clone, PartialEq)]
pub struct InverterParams {
    /// Bus index, 1-based.
    pub id: usize,
    /// Primary droop gain in W/(rad/s), the inverse of the usual droop coefficient.
    pub k_p: f64,
    /// Secondary integral gain, W/rad.
    pub k_s: f64,
    /// Secondary damping (leakage) gain, 1/s.
    pub k_t: f64,
    /// Clock frequency offset, rad/s.
    pub gamma: f64,
    /// Reference power, W.
    pub p_ref: f64,
    /// Local load, W (net-injection sign, consumption negative).
    pub p_load: f64,
}

impl InverterParams {
    pub fn new(id: usize, k_p: f64) -> Self {
        Self {
            id,
            k_p,
            k_s: 0.0,
            k_t: 0.0,
            gamma: 0.0,
            p_ref: 0.0,
            p_load: 0.0,
        }
    }

    pub fn with_gains(mut self, k_s: f64, k_t: f64) -> Self {
        self.k_s = k_s;
        self.k_t = k_t;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_power(mut self, p_ref: f64, p_load: f64) -> Self {
        self.p_ref = p_ref;
        self.p_load = p_load;
        self
    }
}

/// Step change of the load at `bus` by `delta_p` watts at `time` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadEvent {
    pub time: f64,
    pub bus: usize,
    pub delta_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    pub t_end: f64,
    /// Initial secondary reserve; `None` means all zero (black start).
    pub initial_p_s: Option<Vec<f64>>,
    /// Record every `stride`-th grid step.
    pub stride: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 10.0,
            initial_p_s: None,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicrogridScenario {
    pub omega_n: f64,
    pub inverters: Vec<InverterParams>,
    pub network: Option<NetworkModel>,
    pub load_events: Vec<LoadEvent>,
    pub sim: SimSettings,
}

/// A single broken scenario invariant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("scenario has no inverters")]
    EmptyFleet,
    #[error("inverter ids are 1-based, found id 0")]
    ZeroId,
    #[error("inverter id {id} appears more than once")]
    DuplicateId { id: usize },
    #[error("inverter {id}: droop gain k_p = {value} must be positive")]
    NonPositiveDroop { id: usize, value: f64 },
    #[error("inverter {id}: {gain} = {value} must be non-negative")]
    NegativeGain {
        id: usize,
        gain: &'static str,
        value: f64,
    },
    #[error("{field} is not finite")]
    NonFinite { field: String },
    #[error("omega_n = {value} must be positive")]
    NonPositiveNominalFrequency { value: f64 },
    #[error("inverter {id}: {reason}")]
    Droop { id: usize, reason: String },
    #[error("inverter {id}: {reason}")]
    ClockOffset { id: usize, reason: String },
    #[error("load event {index} at t = {time} s is earlier than the event before it")]
    UnsortedEvents { index: usize, time: f64 },
    #[error("load event {index} at t = {time} s lies outside [0, t_end]")]
    EventOutOfRange { index: usize, time: f64 },
    #[error("load event {index} targets unknown bus {bus}")]
    UnknownEventBus { index: usize, bus: usize },
    #[error("bad time grid: dt = {dt}, t_end = {t_end} (need dt > 0 and t_end >= dt)")]
    BadTimeGrid { dt: f64, t_end: f64 },
    #[error("recording stride must be at least 1")]
    ZeroStride,
    #[error("initial P_s has {found} entries, expected {expected}")]
    InitialStateLength { expected: usize, found: usize },
    #[error("network bus {bus} appears more than once")]
    DuplicateBus { bus: usize },
    #[error("network bus {bus}: voltage magnitude {value} must be positive")]
    NonPositiveVoltage { bus: usize, value: f64 },
    #[error("line {line} references unknown bus {bus}")]
    UnknownLineBus { line: usize, bus: usize },
    #[error("line {line} ({from}-{to}) has zero impedance")]
    ZeroImpedanceLine { line: usize, from: usize, to: usize },
    #[error("network is disconnected: bus(es) {unreached:?} unreachable")]
    DisconnectedGraph { unreached: Vec<usize> },
    #[error("inverter {id} has no matching inverter bus in the network")]
    MissingInverterBus { id: usize },
    #[error("network inverter bus {bus} has no matching inverter parameters")]
    OrphanInverterBus { bus: usize },
}

/// Droop gain in W/(rad/s) from a fractional droop (0.015 for 1.5 %) on the
/// base `s_rated`.
pub fn droop_from_percent(droop_percent: f64, s_rated: f64, omega_n: f64) -> Result<f64> {
    for (what, value) in [
        ("droop_percent", droop_percent),
        ("s_rated", s_rated),
        ("omega_n", omega_n),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveInput { what, value });
        }
    }
    Ok(s_rated / (droop_percent * omega_n))
}

/// Clock frequency offset in rad/s from an offset in Hz.
pub fn clock_offset_rad(offset_hz: f64) -> f64 {
    2.0 * PI * offset_hz
}

/// Returns the scenario unchanged iff it satisfies every invariant.
pub fn validate(scenario: MicrogridScenario) -> Result<MicrogridScenario, ValidationErrors> {
    let violations = scenario.violations();
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ValidationErrors(violations))
    }
}

impl MicrogridScenario {
    pub fn n(&self) -> usize {
        self.inverters.len()
    }

    pub fn k_p(&self) -> Vec<f64> {
        self.inverters.iter().map(|i| i.k_p).collect()
    }

    pub fn k_s(&self) -> Vec<f64> {
        self.inverters.iter().map(|i| i.k_s).collect()
    }

    pub fn k_t(&self) -> Vec<f64> {
        self.inverters.iter().map(|i| i.k_t).collect()
    }

    pub fn gamma(&self) -> Vec<f64> {
        self.inverters.iter().map(|i| i.gamma).collect()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.inverters.iter().map(|i| i.id).collect()
    }

    pub fn initial_p_s(&self) -> Vec<f64> {
        self.sim
            .initial_p_s
            .clone()
            .unwrap_or_else(|| vec![0.0; self.n()])
    }

    /// Complete list of invariant violations; empty when valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        if !(self.omega_n > 0.0) || !self.omega_n.is_finite() {
            out.push(Violation::NonPositiveNominalFrequency {
                value: self.omega_n,
            });
        }
        if self.inverters.is_empty() {
            out.push(Violation::EmptyFleet);
        }

        let mut seen = BTreeSet::new();
        for inv in &self.inverters {
            if inv.id == 0 {
                out.push(Violation::ZeroId);
            } else if !seen.insert(inv.id) {
                out.push(Violation::DuplicateId { id: inv.id });
            }
            for (name, value) in [
                ("k_p", inv.k_p),
                ("k_s", inv.k_s),
                ("k_t", inv.k_t),
                ("gamma", inv.gamma),
                ("p_ref", inv.p_ref),
                ("p_load", inv.p_load),
            ] {
                if !value.is_finite() {
                    out.push(Violation::NonFinite {
                        field: format!("inverter {} {name}", inv.id),
                    });
                }
            }
            if inv.k_p <= 0.0 {
                out.push(Violation::NonPositiveDroop {
                    id: inv.id,
                    value: inv.k_p,
                });
            }
            for (gain, value) in [("k_s", inv.k_s), ("k_t", inv.k_t)] {
                if value < 0.0 {
                    out.push(Violation::NegativeGain {
                        id: inv.id,
                        gain,
                        value,
                    });
                }
            }
        }

        let SimSettings {
            dt, t_end, stride, ..
        } = self.sim;
        let grid_ok = dt > 0.0 && dt.is_finite() && t_end.is_finite() && t_end >= dt;
        if !grid_ok {
            out.push(Violation::BadTimeGrid { dt, t_end });
        }
        if stride == 0 {
            out.push(Violation::ZeroStride);
        }
        if let Some(p) = &self.sim.initial_p_s {
            if p.len() != self.n() {
                out.push(Violation::InitialStateLength {
                    expected: self.n(),
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                out.push(Violation::NonFinite {
                    field: "sim.initial_p_s".into(),
                });
            }
        }

        let mut buses: BTreeSet<usize> = seen.clone();
        if let Some(net) = &self.network {
            out.extend(net.violations(&self.ids()));
            buses.extend(net.buses.iter().map(|b| b.id));
        }

        let mut prev = f64::NEG_INFINITY;
        for (index, ev) in self.load_events.iter().enumerate() {
            if !ev.time.is_finite() || !ev.delta_p.is_finite() {
                out.push(Violation::NonFinite {
                    field: format!("load event {index}"),
                });
                continue;
            }
            if ev.time < prev {
                out.push(Violation::UnsortedEvents {
                    index,
                    time: ev.time,
                });
            }
            prev = prev.max(ev.time);
            if ev.time < 0.0 || (t_end.is_finite() && ev.time > t_end) {
                out.push(Violation::EventOutOfRange {
                    index,
                    time: ev.time,
                });
            }
            if !buses.contains(&ev.bus) {
                out.push(Violation::UnknownEventBus { index, bus: ev.bus });
            }
        }

        out
    }

    /// Load schedule over every bus that can carry a load: the inverters'
    /// local loads first (fleet order), then the network's non-inverter buses.
    pub fn load_profile(&self) -> LoadProfile {
        let mut buses: Vec<usize> = self.ids();
        let mut base: Vec<f64> = self.inverters.iter().map(|i| i.p_load).collect();
        if let Some(net) = &self.network {
            for bus in &net.buses {
                match buses.iter().position(|&b| b == bus.id) {
                    Some(slot) => base[slot] += bus.p_load,
                    None => {
                        buses.push(bus.id);
                        base.push(bus.p_load);
                    }
                }
            }
        }
        let events = self
            .load_events
            .iter()
            .filter_map(|ev| {
                let slot = buses.iter().position(|&b| b == ev.bus)?;
                Some((ev.time, slot, ev.delta_p))
            })
            .collect();
        LoadProfile {
            buses,
            base,
            events,
        }
    }

    /// `P_0,i = P_ref,i + P_load,i(t)` with every event at or before `t` applied.
    pub fn p0_vector(&self, t: f64) -> Vec<f64> {
        let loads = self.load_profile().at(t);
        self.inverters
            .iter()
            .zip(&loads)
            .map(|(inv, load)| inv.p_ref + load)
            .collect()
    }

    /// `1ᵀP_0` including loads on non-inverter network buses.
    pub fn p0_total(&self, t: f64) -> f64 {
        let p_ref: f64 = self.inverters.iter().map(|i| i.p_ref).sum();
        p_ref + self.load_profile().at(t).iter().sum::<f64>()
    }

    /// Times at which the load changes, ascending and deduplicated.
    pub fn event_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.load_events.iter().map(|e| e.time).collect();
        times.dedup();
        times
    }
}

/// Piecewise-constant loads, indexed by slot.
#[derive(Debug, Clone)]
pub struct LoadProfile {
    /// Bus id of each slot.
    pub buses: Vec<usize>,
    base: Vec<f64>,
    events: Vec<(f64, usize, f64)>,
}

impl LoadProfile {
    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut loads = self.base.clone();
        for &(time, slot, dp) in &self.events {
            if time <= t {
                loads[slot] += dp;
            }
        }
        loads
    }

    /// Number of events in effect at `t`; loads change only when this does.
    pub fn applied_count(&self, t: f64) -> usize {
        self.events.iter().filter(|e| e.0 <= t).count()
    }

    pub fn slot_of(&self, bus: usize) -> Option<usize> {
        self.buses.iter().position(|&b| b == bus)
    }
}
