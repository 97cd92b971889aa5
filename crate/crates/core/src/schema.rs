//! JSON scenario files.
//!
//! ```json
//! {
//!   "omega_n": 377.0,
//!   "inverters": [
//!     {"id": 1, "droop_percent": 0.015, "s_rated": 2000.0,
//!      "k_s": 1000.0, "k_t": 0.25, "clock_offset_hz": 0.015,
//!      "p_ref": 2000.0, "p_load": 0.0}
//!   ],
//!   "network": {
//!     "buses": [{"id": 1, "kind": "inverter", "v_mag": 480.0, "p_load": 0.0}],
//!     "lines": [{"from": 1, "to": 5, "r": 1.6965, "x": 0.9425}],
//!     "load_model": "constant_power",
//!     "filter": {"l_f": 0.001125, "c_f": 1.15e-5}
//!   },
//!   "load_events": [{"time": 3.0, "bus": 5, "delta_p": -2500.0}],
//!   "sim": {"dt": 0.001, "t_end": 120.0, "initial_p_s": null, "stride": 1}
//! }
//! ```
//!
//! Droop is given either as `k_p` (W per rad/s) or as `droop_percent` with an
//! optional `s_rated` (defaults to `p_ref`). The clock offset is given either
//! as `gamma` (rad/s) or as `clock_offset_hz`. Loads use the net-injection
//! sign: consumption is negative.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ValidationErrors};
use crate::model::{
    clock_offset_rad, droop_from_percent, InverterParams, LoadEvent, MicrogridScenario,
    SimSettings, Violation,
};
use crate::network::{Bus, BusKind, Complex64, FilterParams, Line, LoadModel, NetworkModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub omega_n: f64,
    pub inverters: Vec<InverterSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSpec>,
    #[serde(default)]
    pub load_events: Vec<LoadEventSpec>,
    #[serde(default)]
    pub sim: SimSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverterSpec {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub droop_percent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_rated: Option<f64>,
    #[serde(default)]
    pub k_s: f64,
    #[serde(default)]
    pub k_t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_offset_hz: Option<f64>,
    #[serde(default)]
    pub p_ref: f64,
    #[serde(default)]
    pub p_load: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKindSpec {
    Inverter,
    Load,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadModelSpec {
    #[default]
    ConstantPower,
    ConstantImpedance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    pub id: usize,
    pub kind: BusKindSpec,
    pub v_mag: f64,
    #[serde(default)]
    pub p_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: usize,
    pub to: usize,
    /// Series resistance, Ω.
    pub r: f64,
    /// Series reactance, Ω.
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub l_f: f64,
    pub c_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub buses: Vec<BusSpec>,
    pub lines: Vec<LineSpec>,
    #[serde(default)]
    pub load_model: LoadModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadEventSpec {
    pub time: f64,
    pub bus: usize,
    pub delta_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSpec {
    pub dt: f64,
    pub t_end: f64,
    pub initial_p_s: Option<Vec<f64>>,
    pub stride: usize,
}

impl Default for SimSpec {
    fn default() -> Self {
        let s = SimSettings::default();
        Self {
            dt: s.dt,
            t_end: s.t_end,
            initial_p_s: s.initial_p_s,
            stride: s.stride,
        }
    }
}

impl InverterSpec {
    fn resolve(&self, omega_n: f64, out: &mut Vec<Violation>) -> InverterParams {
        let id = self.id;
        let k_p = match (self.k_p, self.droop_percent) {
            (Some(k), None) => {
                if self.s_rated.is_some() {
                    out.push(Violation::Droop {
                        id,
                        reason: "s_rated only applies with droop_percent".into(),
                    });
                }
                k
            }
            (None, Some(d)) => {
                let base = self.s_rated.unwrap_or(self.p_ref);
                match droop_from_percent(d, base, omega_n) {
                    Ok(k) => k,
                    Err(e) => {
                        out.push(Violation::Droop {
                            id,
                            reason: e.to_string(),
                        });
                        f64::NAN
                    }
                }
            }
            (Some(_), Some(_)) => {
                out.push(Violation::Droop {
                    id,
                    reason: "give either k_p or droop_percent, not both".into(),
                });
                f64::NAN
            }
            (None, None) => {
                out.push(Violation::Droop {
                    id,
                    reason: "missing k_p or droop_percent".into(),
                });
                f64::NAN
            }
        };
        let gamma = match (self.gamma, self.clock_offset_hz) {
            (Some(g), None) => g,
            (None, Some(hz)) => clock_offset_rad(hz),
            (None, None) => 0.0,
            (Some(_), Some(_)) => {
                out.push(Violation::ClockOffset {
                    id,
                    reason: "give either gamma or clock_offset_hz, not both".into(),
                });
                f64::NAN
            }
        };
        InverterParams {
            id,
            k_p,
            k_s: self.k_s,
            k_t: self.k_t,
            gamma,
            p_ref: self.p_ref,
            p_load: self.p_load,
        }
    }
}

impl NetworkSpec {
    fn resolve(&self) -> NetworkModel {
        NetworkModel {
            buses: self
                .buses
                .iter()
                .map(|b| Bus {
                    id: b.id,
                    kind: match b.kind {
                        BusKindSpec::Inverter => BusKind::Inverter,
                        BusKindSpec::Load => BusKind::Load,
                    },
                    v_mag: b.v_mag,
                    p_load: b.p_load,
                })
                .collect(),
            lines: self
                .lines
                .iter()
                .map(|l| Line {
                    from: l.from,
                    to: l.to,
                    z: Complex64::new(l.r, l.x),
                })
                .collect(),
            load_model: match self.load_model {
                LoadModelSpec::ConstantPower => LoadModel::ConstantPower,
                LoadModelSpec::ConstantImpedance => LoadModel::ConstantImpedance,
            },
            filter: self.filter.map(|f| FilterParams {
                l_f: f.l_f,
                c_f: f.c_f,
            }),
        }
    }

    fn from_model(net: &NetworkModel) -> Self {
        Self {
            buses: net
                .buses
                .iter()
                .map(|b| BusSpec {
                    id: b.id,
                    kind: match b.kind {
                        BusKind::Inverter => BusKindSpec::Inverter,
                        BusKind::Load => BusKindSpec::Load,
                    },
                    v_mag: b.v_mag,
                    p_load: b.p_load,
                })
                .collect(),
            lines: net
                .lines
                .iter()
                .map(|l| LineSpec {
                    from: l.from,
                    to: l.to,
                    r: l.z.re,
                    x: l.z.im,
                })
                .collect(),
            load_model: match net.load_model {
                LoadModel::ConstantPower => LoadModelSpec::ConstantPower,
                LoadModel::ConstantImpedance => LoadModelSpec::ConstantImpedance,
            },
            filter: net.filter.map(|f| FilterSpec {
                l_f: f.l_f,
                c_f: f.c_f,
            }),
        }
    }
}

impl ScenarioFile {
    /// Converts to a validated scenario, collecting every violation.
    pub fn into_scenario(self) -> Result<MicrogridScenario, ValidationErrors> {
        let mut out = Vec::new();
        let inverters = self
            .inverters
            .iter()
            .map(|i| i.resolve(self.omega_n, &mut out))
            .collect();
        let scenario = MicrogridScenario {
            omega_n: self.omega_n,
            inverters,
            network: self.network.as_ref().map(NetworkSpec::resolve),
            load_events: self
                .load_events
                .iter()
                .map(|e| LoadEvent {
                    time: e.time,
                    bus: e.bus,
                    delta_p: e.delta_p,
                })
                .collect(),
            sim: SimSettings {
                dt: self.sim.dt,
                t_end: self.sim.t_end,
                initial_p_s: self.sim.initial_p_s,
                stride: self.sim.stride,
            },
        };
        // Droop and offset problems come first; the NaN placeholders they
        // leave behind would only repeat them as non-finite fields.
        let resolved_ok = out.is_empty();
        if resolved_ok {
            out.extend(scenario.violations());
        }
        if out.is_empty() {
            Ok(scenario)
        } else {
            Err(ValidationErrors(out))
        }
    }

    /// File form of a scenario. Droop and offsets are written as `k_p` and `gamma`.
    pub fn from_scenario(s: &MicrogridScenario) -> Self {
        Self {
            omega_n: s.omega_n,
            inverters: s
                .inverters
                .iter()
                .map(|i| InverterSpec {
                    id: i.id,
                    k_p: Some(i.k_p),
                    droop_percent: None,
                    s_rated: None,
                    k_s: i.k_s,
                    k_t: i.k_t,
                    gamma: Some(i.gamma),
                    clock_offset_hz: None,
                    p_ref: i.p_ref,
                    p_load: i.p_load,
                })
                .collect(),
            network: s.network.as_ref().map(NetworkSpec::from_model),
            load_events: s
                .load_events
                .iter()
                .map(|e| LoadEventSpec {
                    time: e.time,
                    bus: e.bus,
                    delta_p: e.delta_p,
                })
                .collect(),
            sim: SimSpec {
                dt: s.sim.dt,
                t_end: s.sim.t_end,
                initial_p_s: s.sim.initial_p_s.clone(),
                stride: s.sim.stride,
            },
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<MicrogridScenario> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    Ok(file.into_scenario()?)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<MicrogridScenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn scenario_to_json(s: &MicrogridScenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_scenario(s)).expect("plain data serializes")
}
