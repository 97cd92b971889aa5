//! Reduced secondary-control models on a uniform grid frequency.
//!
//! With every bus at the same frequency the power balance fixes
//! `Δω = (1ᵀP_0 + 1ᵀP_s) / 1ᵀk_p`, and each inverter integrates its locally
//! measured deviation `Δω − γ_i`:
//!
//! ```text
//! adhoc:   dP_s,i/dt = −k_s,i (Δω − γ_i)
//! damped:  dP_s,i/dt = −k_t,i P_s,i − k_s,i (Δω − γ_i)
//! droop:   P_s frozen at its initial value
//! ```

use crate::error::{Error, Result};
use crate::model::{InverterParams, MicrogridScenario};
use crate::ode::{rk4_step, Rk4Workspace, StepPlan};
use crate::trajectory::{Sample, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedModel {
    DroopOnly,
    Adhoc,
    Damped,
}

/// Quasi-steady frequency deviation from the power balance.
pub fn delta_omega(p_s: &[f64], p0: &[f64], k_p: &[f64]) -> Result<f64> {
    let k_p_sum: f64 = k_p.iter().sum();
    if !(k_p_sum > 0.0) {
        return Err(Error::ZeroDroopSum);
    }
    Ok((p0.iter().sum::<f64>() + p_s.iter().sum::<f64>()) / k_p_sum)
}

/// Gains of a fleet packed for repeated right-hand-side evaluation.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub model: ReducedModel,
    k_p_sum: f64,
    k_s: Vec<f64>,
    k_t: Vec<f64>,
    gamma: Vec<f64>,
}

impl ReducedSystem {
    pub fn new(fleet: &[InverterParams], model: ReducedModel) -> Result<Self> {
        let k_p_sum: f64 = fleet.iter().map(|i| i.k_p).sum();
        if !(k_p_sum > 0.0) {
            return Err(Error::ZeroDroopSum);
        }
        Ok(Self {
            model,
            k_p_sum,
            k_s: fleet.iter().map(|i| i.k_s).collect(),
            k_t: fleet.iter().map(|i| i.k_t).collect(),
            gamma: fleet.iter().map(|i| i.gamma).collect(),
        })
    }

    pub fn delta_omega(&self, p_s: &[f64], p0_total: f64) -> f64 {
        (p0_total + p_s.iter().sum::<f64>()) / self.k_p_sum
    }

    /// Writes `dP_s/dt` into `out` and returns the `Δω` it was computed from.
    pub fn rhs_into(&self, p_s: &[f64], p0_total: f64, out: &mut [f64]) -> f64 {
        let dw = self.delta_omega(p_s, p0_total);
        match self.model {
            ReducedModel::DroopOnly => out.fill(0.0),
            ReducedModel::Adhoc => {
                for i in 0..out.len() {
                    out[i] = -self.k_s[i] * (dw - self.gamma[i]);
                }
            }
            ReducedModel::Damped => {
                for i in 0..out.len() {
                    let mut r = -self.k_s[i] * (dw - self.gamma[i]);
                    // Skipped at k_t = 0 so the damped model reduces to adhoc bit for bit.
                    if self.k_t[i] != 0.0 {
                        r -= self.k_t[i] * p_s[i];
                    }
                    out[i] = r;
                }
            }
        }
        dw
    }

    fn sample(&self, t: f64, p_s: &[f64], p0_total: f64) -> Sample {
        let mut rate = vec![0.0; p_s.len()];
        let dw = self.rhs_into(p_s, p0_total, &mut rate);
        Sample {
            t,
            p_s: p_s.to_vec(),
            p_s_rate: rate,
            delta_omega: dw,
            freq_meas: self.gamma.iter().map(|g| dw - g).collect(),
            network: None,
        }
    }
}

fn check_len(fleet: &[InverterParams], p_s: &[f64]) -> Result<()> {
    if p_s.len() != fleet.len() {
        return Err(Error::DimensionMismatch {
            what: "P_s",
            expected: fleet.len(),
            found: p_s.len(),
        });
    }
    Ok(())
}

/// `dP_s/dt` of the adhoc parallel-integrator scheme.
pub fn adhoc_rhs(p_s: &[f64], fleet: &[InverterParams], p0_total: f64) -> Result<Vec<f64>> {
    check_len(fleet, p_s)?;
    let sys = ReducedSystem::new(fleet, ReducedModel::Adhoc)?;
    let mut out = vec![0.0; p_s.len()];
    sys.rhs_into(p_s, p0_total, &mut out);
    Ok(out)
}

/// `dP_s/dt` of the damped scheme.
pub fn damped_rhs(p_s: &[f64], fleet: &[InverterParams], p0_total: f64) -> Result<Vec<f64>> {
    check_len(fleet, p_s)?;
    let sys = ReducedSystem::new(fleet, ReducedModel::Damped)?;
    let mut out = vec![0.0; p_s.len()];
    sys.rhs_into(p_s, p0_total, &mut out);
    Ok(out)
}

/// Integrates the reduced model over the scenario's time grid with RK4.
pub fn integrate(scenario: &MicrogridScenario, model: ReducedModel) -> Result<Trajectory> {
    let violations = scenario.violations();
    if !violations.is_empty() {
        return Err(Error::Validation(crate::error::ValidationErrors(
            violations,
        )));
    }
    let sys = ReducedSystem::new(&scenario.inverters, model)?;
    let profile = scenario.load_profile();
    let p_ref_sum: f64 = scenario.inverters.iter().map(|i| i.p_ref).sum();
    let p0_at = |t: f64| p_ref_sum + profile.at(t).iter().sum::<f64>();
    let stride = scenario.sim.stride;

    let mut y = scenario.initial_p_s();
    let mut ws = Rk4Workspace::new(y.len());
    let mut traj = Trajectory {
        ids: scenario.ids(),
        samples: vec![sys.sample(0.0, &y, p0_at(0.0))],
    };

    let mut applied = profile.applied_count(0.0);
    let mut p0_total = p0_at(0.0);
    for step in StepPlan::new(scenario.sim.dt, scenario.sim.t_end, &scenario.event_times()) {
        let now = profile.applied_count(step.t);
        if now != applied {
            applied = now;
            p0_total = p0_at(step.t);
        }
        rk4_step::<(), _>(step.t, &mut y, step.h, &mut ws, |_, p, out| {
            sys.rhs_into(p, p0_total, out);
            Ok(())
        })
        .expect("reduced rhs is infallible");
        let t = step.t + step.h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        let on_stride = step.grid_index.is_some_and(|k| k % stride == 0);
        if on_stride || step.is_last {
            traj.samples.push(sys.sample(t, &y, p0_at(t)));
        }
    }
    Ok(traj)
}
