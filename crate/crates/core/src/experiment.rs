//! Runs, gain sweeps and prediction-versus-simulation comparison.

use std::fmt;
use std::io::Write;

use crate::dynamics::{integrate, ReducedModel};
use crate::error::{Error, Result};
use crate::modal::{decompose_state, norm, steady_state_general, SteadyStatePrediction};
use crate::model::MicrogridScenario;
use crate::network::{equivalent_p0_total, run_testbed};
use crate::trajectory::Trajectory;

/// `‖dP_s/dt‖` below which a run counts as settled, W/s.
pub const SETTLED_RATE: f64 = 1e-6;
pub const REDUCED_TOLERANCE: f64 = 1e-6;
pub const NETWORK_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimModel {
    Droop,
    Adhoc,
    Damped,
    Network,
}

impl SimModel {
    pub fn name(self) -> &'static str {
        match self {
            SimModel::Droop => "droop",
            SimModel::Adhoc => "adhoc",
            SimModel::Damped => "damped",
            SimModel::Network => "network",
        }
    }
}

pub fn simulate(scenario: &MicrogridScenario, model: SimModel) -> Result<Trajectory> {
    match model {
        SimModel::Droop => integrate(scenario, ReducedModel::DroopOnly),
        SimModel::Adhoc => integrate(scenario, ReducedModel::Adhoc),
        SimModel::Damped => integrate(scenario, ReducedModel::Damped),
        SimModel::Network => run_testbed(scenario),
    }
}

/// Time of the last load change, or 0 without events.
pub fn load_step_time(scenario: &MicrogridScenario) -> f64 {
    scenario.load_events.last().map_or(0.0, |e| e.time)
}

/// First recorded time `t ≥ t_step` after which `Δω` stays within 1 % of
/// `|Δω(t_step) − Δω(t_end)|` around `Δω(t_end)`.
pub fn settling_time(traj: &Trajectory, t_step: f64) -> f64 {
    let end = traj.last().delta_omega;
    let start = traj
        .samples
        .iter()
        .find(|s| s.t >= t_step)
        .unwrap_or_else(|| traj.last());
    let band = 0.01 * (start.delta_omega - end).abs();
    let mut settled = traj.last().t;
    for s in traj.samples.iter().rev() {
        if s.t < start.t || (s.delta_omega - end).abs() > band {
            break;
        }
        settled = s.t;
    }
    settled
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    KS,
    KT,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::KS => "k_s",
            SweepParam::KT => "k_t",
        }
    }
}

/// One gain swept over `values`, applied to every inverter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("sweep has no values")]
    Empty,
    #[error("sweep value {0} must be finite and non-negative")]
    BadValue(f64),
}

impl SweepSpec {
    pub fn new(parameter: SweepParam, values: Vec<f64>) -> Result<Self, SweepError> {
        if values.is_empty() {
            return Err(SweepError::Empty);
        }
        if let Some(&v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(SweepError::BadValue(v));
        }
        Ok(Self { parameter, values })
    }

    pub fn apply(&self, base: &MicrogridScenario, value: f64) -> MicrogridScenario {
        let mut s = base.clone();
        for inv in &mut s.inverters {
            match self.parameter {
                SweepParam::KS => inv.k_s = value,
                SweepParam::KT => inv.k_t = value,
            }
        }
        s
    }
}

/// Terminal metrics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub value: f64,
    pub delta_omega: f64,
    /// `‖P̂_s‖` of the terminal state; `None` when some `k_s` is zero.
    pub p_hat_norm: Option<f64>,
    pub settling_time: f64,
    pub ps_rate_norm: f64,
    pub settled: bool,
}

pub fn summarize(scenario: &MicrogridScenario, traj: &Trajectory, value: f64) -> RunSummary {
    let last = traj.last();
    let ps_rate_norm = norm(&last.p_s_rate);
    RunSummary {
        value,
        delta_omega: last.delta_omega,
        p_hat_norm: decompose_state(&last.p_s, &scenario.inverters)
            .ok()
            .map(|d| norm(&d.p_hat_s)),
        settling_time: settling_time(traj, load_step_time(scenario)),
        ps_rate_norm,
        settled: ps_rate_norm < SETTLED_RATE,
    }
}

/// Outcome of one sweep point: the summary or the failure message.
pub type SweepRow = (f64, std::result::Result<RunSummary, String>);

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_summary_csv<W: Write>(param: SweepParam, rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "parameter",
        "value",
        "delta_omega",
        "p_hat_norm",
        "settling_time",
        "ps_rate_norm",
        "settled",
        "error",
    ])?;
    for (index, (value, row)) in rows.iter().enumerate() {
        let mut rec = vec![index.to_string(), param.name().into(), fmt_f(*value)];
        match row {
            Ok(s) => rec.extend([
                fmt_f(s.delta_omega),
                s.p_hat_norm.map(fmt_f).unwrap_or_default(),
                fmt_f(s.settling_time),
                fmt_f(s.ps_rate_norm),
                s.settled.to_string(),
                String::new(),
            ]),
            Err(e) => rec.extend([
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "false".into(),
                e.clone(),
            ]),
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub model: SimModel,
    pub quantity: String,
    pub simulated: f64,
    pub predicted: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tolerance: f64,
}

impl CompareRow {
    fn new(model: SimModel, quantity: String, simulated: f64, predicted: f64, tol: f64) -> Self {
        let abs_err = (simulated - predicted).abs();
        let rel_err = if predicted == 0.0 {
            abs_err
        } else {
            abs_err / predicted.abs()
        };
        Self {
            model,
            quantity,
            simulated,
            predicted,
            abs_err,
            rel_err,
            tolerance: tol,
        }
    }

    pub fn pass(&self) -> bool {
        self.rel_err < self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(CompareRow::pass)
    }

    pub fn worst(&self, model: SimModel) -> Option<&CompareRow> {
        self.rows
            .iter()
            .filter(|r| r.model == model)
            .max_by(|a, b| a.rel_err.total_cmp(&b.rel_err))
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:<12} {:>24} {:>24} {:>12} {:>12} {:>8} result",
            "model", "quantity", "simulated", "predicted", "abs_err", "rel_err", "tol"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<8} {:<12} {:>24.16e} {:>24.16e} {:>12.3e} {:>12.3e} {:>8.0e} {}",
                r.model.name(),
                r.quantity,
                r.simulated,
                r.predicted,
                r.abs_err,
                r.rel_err,
                r.tolerance,
                if r.pass() { "PASS" } else { "FAIL" }
            )?;
        }
        write!(f, "overall: {}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

fn compare_rows(
    model: SimModel,
    traj: &Trajectory,
    pred: &SteadyStatePrediction,
    tol: f64,
) -> Vec<CompareRow> {
    let last = traj.last();
    let mut rows = vec![CompareRow::new(
        model,
        "delta_omega".into(),
        last.delta_omega,
        pred.delta_omega,
        tol,
    )];
    for ((id, sim), p) in traj.ids.iter().zip(&last.p_s).zip(&pred.p_s) {
        rows.push(CompareRow::new(model, format!("P_s_{id}"), *sim, *p, tol));
    }
    rows
}

/// Terminal states of the damped reduced model and, when the scenario has a
/// network, the network model against the closed-form steady state. The
/// network prediction uses the loss- and offset-equivalent `1ᵀP_0`.
pub fn compare(scenario: &MicrogridScenario) -> Result<CompareReport> {
    let t_end = scenario.sim.t_end;
    let pred = steady_state_general(&scenario.inverters, scenario.p0_total(t_end))?;
    let reduced = simulate(scenario, SimModel::Damped)?;
    let mut rows = compare_rows(SimModel::Damped, &reduced, &pred, REDUCED_TOLERANCE);
    if scenario.network.is_some() {
        let net = simulate(scenario, SimModel::Network)?;
        let losses = net
            .last()
            .network
            .as_ref()
            .ok_or(Error::MissingNetwork)?
            .losses;
        let p0 = equivalent_p0_total(scenario, t_end, losses);
        let pred = steady_state_general(&scenario.inverters, p0)?;
        rows.extend(compare_rows(
            SimModel::Network,
            &net,
            &pred,
            NETWORK_TOLERANCE,
        ));
    }
    Ok(CompareReport { rows })
}
