//! Quasi-static phasor network: fixed bus voltage magnitudes, active power
//! only, angle-droop inverters coupled through complex line impedances.

mod flow;
mod sim;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::model::Violation;

pub use flow::{power_injections, FlowSolution, LoadFlow, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use sim::{
    equivalent_p0_total, network_rhs, run_testbed, run_with_initial_angles, NetworkEval,
    NetworkSimulator,
};

pub type Complex64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Inverter,
    Load,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Fixed voltage magnitude, V.
    pub v_mag: f64,
    /// Load at the bus, W, net-injection sign (consumption negative). On
    /// inverter buses it adds to the inverter's local load.
    pub p_load: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series impedance, Ω.
    pub z: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadModel {
    /// Loads draw their rated power; load-bus angles come from a Newton solve.
    #[default]
    ConstantPower,
    /// Loads become shunt conductances at nominal voltage and load buses are
    /// eliminated by Kron reduction; their voltage magnitudes then float.
    ConstantImpedance,
}

/// Output filter of each inverter. Recorded with the scenario but not used
/// by the phasor model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub l_f: f64,
    pub c_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub load_model: LoadModel,
    pub filter: Option<FilterParams>,
}

impl NetworkModel {
    pub fn index_of(&self, bus: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == bus)
    }

    pub fn v_mag(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.v_mag).collect()
    }

    /// Bus ids not reachable from the first bus.
    fn unreachable(&self) -> Vec<usize> {
        let index: BTreeMap<usize, usize> = self
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect();
        let mut adj = vec![Vec::new(); self.buses.len()];
        for line in &self.lines {
            if let (Some(&a), Some(&b)) = (index.get(&line.from), index.get(&line.to)) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut seen = vec![false; self.buses.len()];
        let mut queue = VecDeque::new();
        if !self.buses.is_empty() {
            seen[0] = true;
            queue.push_back(0);
        }
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        self.buses
            .iter()
            .zip(seen)
            .filter(|(_, s)| !s)
            .map(|(b, _)| b.id)
            .collect()
    }

    pub fn violations(&self, inverter_ids: &[usize]) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut ids = BTreeSet::new();
        for bus in &self.buses {
            if !ids.insert(bus.id) {
                out.push(Violation::DuplicateBus { bus: bus.id });
            }
            if !(bus.v_mag > 0.0) || !bus.v_mag.is_finite() {
                out.push(Violation::NonPositiveVoltage {
                    bus: bus.id,
                    value: bus.v_mag,
                });
            }
            if !bus.p_load.is_finite() {
                out.push(Violation::NonFinite {
                    field: format!("bus {} p_load", bus.id),
                });
            }
        }
        for (line, l) in self.lines.iter().enumerate() {
            for bus in [l.from, l.to] {
                if !ids.contains(&bus) {
                    out.push(Violation::UnknownLineBus { line, bus });
                }
            }
            if l.z.norm() == 0.0 || !l.z.re.is_finite() || !l.z.im.is_finite() {
                out.push(Violation::ZeroImpedanceLine {
                    line,
                    from: l.from,
                    to: l.to,
                });
            }
        }
        let unreached = self.unreachable();
        if !unreached.is_empty() {
            out.push(Violation::DisconnectedGraph { unreached });
        }
        for &id in inverter_ids {
            let ok = self
                .buses
                .iter()
                .any(|b| b.id == id && b.kind == BusKind::Inverter);
            if !ok {
                out.push(Violation::MissingInverterBus { id });
            }
        }
        for bus in self.buses.iter().filter(|b| b.kind == BusKind::Inverter) {
            if !inverter_ids.contains(&bus.id) {
                out.push(Violation::OrphanInverterBus { bus: bus.id });
            }
        }
        out
    }

    /// Bus admittance matrix in bus order: `−1/Z` off the diagonal, the sum of
    /// incident line admittances on it.
    pub fn admittance_matrix(&self) -> Result<DMatrix<Complex64>> {
        let n = self.buses.len();
        let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for (line, l) in self.lines.iter().enumerate() {
            if l.z.norm() == 0.0 {
                return Err(Error::ZeroImpedanceLine {
                    line,
                    from: l.from,
                    to: l.to,
                });
            }
            let (a, b) = match (self.index_of(l.from), self.index_of(l.to)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Validation(crate::error::ValidationErrors(
                        self.violations(&[]),
                    )))
                }
            };
            let adm = l.z.inv();
            y[(a, a)] += adm;
            y[(b, b)] += adm;
            y[(a, b)] -= adm;
            y[(b, a)] -= adm;
        }
        let unreached = self.unreachable();
        if !unreached.is_empty() {
            return Err(Error::DisconnectedGraph {
                root: self.buses[0].id,
                unreached,
            });
        }
        Ok(y)
    }

    /// Series losses `Σ |I|² R` for the given bus voltage phasors.
    pub fn line_losses(&self, v_mag: &[f64], theta: &[f64]) -> f64 {
        self.lines
            .iter()
            .filter_map(|l| {
                let a = self.index_of(l.from)?;
                let b = self.index_of(l.to)?;
                let va = Complex64::from_polar(v_mag[a], theta[a]);
                let vb = Complex64::from_polar(v_mag[b], theta[b]);
                let i = (va - vb) / l.z;
                Some(i.norm_sqr() * l.z.re)
            })
            .sum()
    }
}
