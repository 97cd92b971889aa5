use super::flow::{FlowSolution, LoadFlow};
use crate::error::{Error, Result, ValidationErrors};
use crate::model::{LoadProfile, MicrogridScenario};
use crate::ode::{rk4_step, Rk4Workspace, StepPlan};
use crate::trajectory::{NetworkSample, Sample, Trajectory};

/// Everything derived from one network state `(θ_inv, P_s)`.
#[derive(Debug, Clone)]
pub struct NetworkEval {
    pub flow: FlowSolution,
    /// Electrical output of each inverter, W.
    pub p_gen: Vec<f64>,
    /// `dθ_i/dt = ω_i − ω_n`, clock offset included.
    pub dtheta: Vec<f64>,
    /// Locally measured deviation `(ω_i − ω_n) − γ_i`.
    pub freq_meas: Vec<f64>,
    pub dp_s: Vec<f64>,
}

impl NetworkEval {
    /// Droop-weighted mean frequency deviation `Σ k_p,i dθ_i / Σ k_p,i`.
    /// Equals the common deviation once the inverters synchronize.
    pub fn delta_omega(&self, k_p: &[f64]) -> f64 {
        let num: f64 = k_p.iter().zip(&self.dtheta).map(|(k, d)| k * d).sum();
        num / k_p.iter().sum::<f64>()
    }
}

/// Coupled angle-droop and secondary-control dynamics on a phasor network.
///
/// The state is `[θ_inv; P_s]`. Load-bus angles are algebraic and solved at
/// every right-hand-side evaluation.
#[derive(Debug, Clone)]
pub struct NetworkSimulator {
    flow: LoadFlow,
    omega_n: f64,
    inv_bus: Vec<usize>,
    k_p: Vec<f64>,
    k_s: Vec<f64>,
    k_t: Vec<f64>,
    gamma: Vec<f64>,
    p_ref: Vec<f64>,
    local_load: Vec<f64>,
    profile: LoadProfile,
    /// Profile slot of each load bus of the flow solver.
    load_slots: Vec<usize>,
}

impl NetworkSimulator {
    pub fn new(scenario: &MicrogridScenario) -> Result<Self> {
        let violations = scenario.violations();
        if !violations.is_empty() {
            return Err(Error::Validation(ValidationErrors(violations)));
        }
        let net = scenario.network.as_ref().ok_or(Error::MissingNetwork)?;
        let ids = scenario.ids();
        let flow = LoadFlow::new(net, &ids)?;
        let profile = scenario.load_profile();
        let load_slots = flow
            .load_buses()
            .iter()
            .map(|&i| {
                profile
                    .slot_of(net.buses[i].id)
                    .expect("every bus has a load slot")
            })
            .collect();
        let inv_bus = ids
            .iter()
            .map(|&id| net.index_of(id).expect("validated"))
            .collect();
        let mut sim = Self {
            flow,
            omega_n: scenario.omega_n,
            inv_bus,
            k_p: scenario.k_p(),
            k_s: scenario.k_s(),
            k_t: scenario.k_t(),
            gamma: scenario.gamma(),
            p_ref: scenario.inverters.iter().map(|i| i.p_ref).collect(),
            local_load: vec![0.0; ids.len()],
            profile,
            load_slots,
        };
        sim.set_time(0.0)?;
        Ok(sim)
    }

    pub fn n(&self) -> usize {
        self.k_p.len()
    }

    /// Applies the load schedule in effect at `t`.
    pub fn set_time(&mut self, t: f64) -> Result<()> {
        let loads = self.profile.at(t);
        self.set_loads(&loads)
    }

    /// Sets every load slot (inverter-local first, then load buses), W.
    pub fn set_loads(&mut self, loads: &[f64]) -> Result<()> {
        let n = self.n();
        self.local_load.copy_from_slice(&loads[..n]);
        let spec: Vec<f64> = self.load_slots.iter().map(|&s| loads[s]).collect();
        self.flow.set_load_injections(&spec)
    }

    pub fn local_loads(&self) -> &[f64] {
        &self.local_load
    }

    pub fn evaluate(&mut self, theta_inv: &[f64], p_s: &[f64]) -> Result<NetworkEval> {
        let flow = self.flow.solve(theta_inv)?;
        let n = self.n();
        let mut p_gen = Vec::with_capacity(n);
        let mut dtheta = Vec::with_capacity(n);
        let mut freq_meas = Vec::with_capacity(n);
        let mut dp_s = Vec::with_capacity(n);
        for i in 0..n {
            let pg = flow.p_inj[self.inv_bus[i]] - self.local_load[i];
            let meas = (self.p_ref[i] + p_s[i] - pg) / self.k_p[i];
            let mut rate = -self.k_s[i] * meas;
            // Skipped at k_t = 0 so damped and adhoc agree bit for bit.
            if self.k_t[i] != 0.0 {
                rate -= self.k_t[i] * p_s[i];
            }
            p_gen.push(pg);
            dtheta.push(meas + self.gamma[i]);
            freq_meas.push(meas);
            dp_s.push(rate);
        }
        Ok(NetworkEval {
            flow,
            p_gen,
            dtheta,
            freq_meas,
            dp_s,
        })
    }

    /// `Σ P_gen − Σ P_consumed − losses` for an evaluated state, W.
    pub fn balance_residual(&self, eval: &NetworkEval) -> f64 {
        let gen: f64 = eval.p_gen.iter().sum();
        let local: f64 = self.local_load.iter().sum();
        let bus_loads: f64 = self
            .flow
            .load_buses()
            .iter()
            .map(|&i| eval.flow.p_inj[i])
            .sum();
        gen + local + bus_loads - eval.flow.losses
    }

    fn sample(&self, t: f64, p_s: &[f64], eval: NetworkEval) -> Sample {
        let delta_omega = eval.delta_omega(&self.k_p);
        let theta0 = eval.flow.theta[0];
        Sample {
            t,
            p_s: p_s.to_vec(),
            p_s_rate: eval.dp_s,
            delta_omega,
            freq_meas: eval.freq_meas,
            network: Some(NetworkSample {
                p_gen: eval.p_gen,
                omega: eval.dtheta.iter().map(|d| self.omega_n + d).collect(),
                losses: eval.flow.losses,
                theta: eval.flow.theta.iter().map(|th| th - theta0).collect(),
            }),
        }
    }

    /// Integrates from `θ_inv(0) = theta0`, `P_s(0)` from the scenario.
    pub fn run(&mut self, scenario: &MicrogridScenario, theta0: &[f64]) -> Result<Trajectory> {
        let n = self.n();
        if theta0.len() != n {
            return Err(Error::DimensionMismatch {
                what: "initial angles",
                expected: n,
                found: theta0.len(),
            });
        }
        let mut y: Vec<f64> = theta0.to_vec();
        y.extend(scenario.initial_p_s());
        let mut ws = Rk4Workspace::new(2 * n);
        self.set_time(0.0)?;
        let first = self.evaluate(&y[..n], &y[n..])?;
        let mut traj = Trajectory {
            ids: scenario.ids(),
            samples: vec![self.sample(0.0, &y[n..], first)],
        };
        let stride = scenario.sim.stride;
        let mut applied = self.profile.applied_count(0.0);
        for step in StepPlan::new(scenario.sim.dt, scenario.sim.t_end, &scenario.event_times()) {
            let now = self.profile.applied_count(step.t);
            if now != applied {
                applied = now;
                self.set_time(step.t)?;
            }
            rk4_step(step.t, &mut y, step.h, &mut ws, |_, state, out| {
                let eval = self.evaluate(&state[..n], &state[n..])?;
                out[..n].copy_from_slice(&eval.dtheta);
                out[n..].copy_from_slice(&eval.dp_s);
                Ok::<(), Error>(())
            })?;
            let t = step.t + step.h;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { t });
            }
            let on_stride = step.grid_index.is_some_and(|k| k % stride == 0);
            if on_stride || step.is_last {
                // A sample on an event time reports the post-event loads.
                let now = self.profile.applied_count(t);
                if now != applied {
                    applied = now;
                    self.set_time(t)?;
                }
                let eval = self.evaluate(&y[..n], &y[n..])?;
                traj.samples.push(self.sample(t, &y[n..], eval));
            }
        }
        Ok(traj)
    }
}

/// Right-hand side of the network model at time `t` for the given state.
pub fn network_rhs(
    scenario: &MicrogridScenario,
    t: f64,
    theta_inv: &[f64],
    p_s: &[f64],
) -> Result<NetworkEval> {
    let mut sim = NetworkSimulator::new(scenario)?;
    for (what, v) in [("angles", theta_inv), ("P_s", p_s)] {
        if v.len() != sim.n() {
            return Err(Error::DimensionMismatch {
                what,
                expected: sim.n(),
                found: v.len(),
            });
        }
    }
    sim.set_time(t)?;
    sim.evaluate(theta_inv, p_s)
}

/// Black start: every inverter angle at zero.
pub fn run_testbed(scenario: &MicrogridScenario) -> Result<Trajectory> {
    run_with_initial_angles(scenario, &vec![0.0; scenario.n()])
}

pub fn run_with_initial_angles(scenario: &MicrogridScenario, theta0: &[f64]) -> Result<Trajectory> {
    NetworkSimulator::new(scenario)?.run(scenario, theta0)
}

/// `1ᵀP_0` of the reduced model equivalent to a synchronized network:
/// line losses act as extra load and the clock offsets shift every droop
/// setpoint by `k_p,i γ_i`.
pub fn equivalent_p0_total(scenario: &MicrogridScenario, t: f64, losses: f64) -> f64 {
    let offset: f64 = scenario.inverters.iter().map(|i| i.k_p * i.gamma).sum();
    scenario.p0_total(t) + offset - losses
}
