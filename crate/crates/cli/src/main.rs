use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mgsecsim::experiment::{
    compare, simulate, summarize, write_summary_csv, SimModel, SweepParam, SweepRow, SweepSpec,
};
use mgsecsim::modal::{
    steady_state_general, steady_state_uniform, tuning_report, DEFAULT_TUNING_THRESHOLD,
};
use mgsecsim::schema::{load_scenario, scenario_to_json};
use mgsecsim::{testbed, Error, InverterParams, MicrogridScenario, SimSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_UNDEFINED: u8 = 4;
const EXIT_COMPARE: u8 = 5;

#[derive(Parser)]
#[command(
    name = "mgsecsim",
    version,
    about = "Decentralized secondary frequency control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Droop,
    Adhoc,
    Damped,
    Network,
}

impl From<ModelArg> for SimModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Droop => SimModel::Droop,
            ModelArg::Adhoc => SimModel::Adhoc,
            ModelArg::Damped => SimModel::Damped,
            ModelArg::Network => SimModel::Network,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    #[value(name = "k_s", alias = "ks")]
    KS,
    #[value(name = "k_t", alias = "kt")]
    KT,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its trajectory as CSV.
    Simulate {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "damped")]
        model: ModelArg,
        #[arg(long)]
        out: PathBuf,
        /// Record every N-th step (overrides the scenario file).
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Print the analytic steady state and the tuning report.
    Predict {
        scenario: PathBuf,
        /// Tuning criterion threshold on the ratio k_t 1'k_p / 1'k_s.
        #[arg(long, default_value_t = DEFAULT_TUNING_THRESHOLD)]
        threshold: f64,
    },
    /// Sweep one gain over a list of values; one CSV per value plus summary.csv.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        param: ParamArg,
        /// Comma-separated gain values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Defaults to network when the scenario has one, damped otherwise.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Compare simulated terminal states with the analytic prediction.
    Compare { scenario: PathBuf },
    /// Write a scenario file: the testbed, or a random reduced fleet with --seed.
    Scenario {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1000.0)]
        k_s: f64,
        #[arg(long, default_value_t = 0.25)]
        k_t: f64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Validation(_) | Error::Io(_) | Error::Json(_) | Error::MissingNetwork => {
                EXIT_VALIDATION
            }
            Error::ZeroDamping { .. } => EXIT_UNDEFINED,
            _ => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn load(path: &Path, stride: Option<usize>) -> Result<MicrogridScenario, Failure> {
    let mut s = load_scenario(path).map_err(|e| Failure {
        message: format!("{}: {}", path.display(), e),
        ..Failure::from(e)
    })?;
    if let Some(stride) = stride {
        s.sim.stride = stride;
        let v = s.violations();
        if !v.is_empty() {
            return Err(Error::Validation(mgsecsim::ValidationErrors(v)).into());
        }
    }
    Ok(s)
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut fs::File) -> mgsecsim::Result<()>,
) -> CmdResult {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        fill(&mut f)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok::<(), Error>(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn cmd_simulate(path: &Path, model: SimModel, out: &Path, stride: Option<usize>) -> CmdResult {
    let s = load(path, stride)?;
    let traj = simulate(&s, model)?;
    write_atomic(out, |f| traj.write_csv(f))
}

fn cmd_predict(path: &Path, threshold: f64) -> CmdResult {
    let s = load(path, None)?;
    let p0 = s.p0_total(s.sim.t_end);
    let undamped: Vec<usize> = s
        .inverters
        .iter()
        .filter(|i| i.k_t == 0.0)
        .map(|i| i.id)
        .collect();
    if !undamped.is_empty() {
        println!("p0_total = {p0:.16e}");
        println!("undamped_inverters = {undamped:?}");
        eprintln!(
            "no steady state: k_t = 0 for inverter(s) {undamped:?}; without damping the \
             integrators accumulate non-homogeneous clock offsets, so P_s drifts linearly"
        );
        return Err(Failure {
            code: EXIT_UNDEFINED,
            message: "prediction undefined for k_t = 0".into(),
        });
    }
    let general = steady_state_general(&s.inverters, p0)?;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    kv("p0_total", format!("{p0:.16e}"));
    kv("delta_omega", format!("{:.16e}", general.delta_omega));
    for (inv, p) in s.inverters.iter().zip(&general.p_s) {
        kv(&format!("p_s_{}", inv.id), format!("{p:.16e}"));
    }
    kv("total_p_s", format!("{:.16e}", general.total_p_s));
    let uniform = steady_state_uniform(&s.inverters, p0);
    match &uniform {
        Ok(u) => {
            kv("alpha", format!("{:.16e}", u.alpha));
            for (inv, p) in s.inverters.iter().zip(&u.p_hat_s) {
                kv(&format!("p_hat_s_{}", inv.id), format!("{p:.16e}"));
            }
            kv("gamma_bar", format!("{:.16e}", u.gamma_bar));
            kv(
                "delta_omega_approx",
                format!("{:.16e}", u.delta_omega_approx),
            );
        }
        Err(e) => kv("modal", format!("n/a ({e})")),
    }
    match tuning_report(&s.inverters, p0, threshold) {
        Ok(t) => {
            kv("k_t", format!("{:.16e}", t.k_t));
            kv("ratio", format!("{:.16e}", t.ratio));
            kv("threshold", format!("{}", t.threshold));
            kv("criterion_met", t.criterion_met.to_string());
            kv("tuning_delta_omega", format!("{:.16e}", t.delta_omega));
            kv("unbalance", format!("{:.16e}", t.unbalance));
            kv(
                "settling_time_slow",
                format!("{:.16e}", t.settling_times[0]),
            );
            kv(
                "settling_time_fast",
                format!("{:.16e}", t.settling_times[1]),
            );
        }
        Err(e) => kv("tuning", format!("n/a ({e})")),
    }
    out.push('\n');
    out.push_str(&format!(
        "{:>4} {:>14} {:>14} {:>14}\n",
        "id", "k_s", "gamma", "P_s*"
    ));
    for (inv, p) in s.inverters.iter().zip(&general.p_s) {
        out.push_str(&format!(
            "{:>4} {:>14.6} {:>14.6e} {:>14.6}\n",
            inv.id, inv.k_s, inv.gamma, p
        ));
    }
    io::stdout().write_all(out.as_bytes())?;
    Ok(())
}

fn thread_count() -> Option<usize> {
    std::env::var("MGSECSIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn cmd_sweep(
    path: &Path,
    param: SweepParam,
    values: Vec<f64>,
    out: &Path,
    model: Option<SimModel>,
    stride: Option<usize>,
) -> CmdResult {
    let base = load(path, stride)?;
    let spec = SweepSpec::new(param, values).map_err(|e| Failure {
        code: EXIT_VALIDATION,
        message: e.to_string(),
    })?;
    let model = model.unwrap_or(if base.network.is_some() {
        SimModel::Network
    } else {
        SimModel::Damped
    });
    fs::create_dir_all(out)?;
    let run = |(index, &value): (usize, &f64)| -> SweepRow {
        let scenario = spec.apply(&base, value);
        let result = simulate(&scenario, model)
            .map_err(|e| e.to_string())
            .and_then(|traj| {
                let file = out.join(format!("{}_{index:03}.csv", param.name()));
                write_atomic(&file, |f| traj.write_csv(f)).map_err(|e| e.message)?;
                Ok(summarize(&scenario, &traj, value))
            });
        (value, result)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure {
        code: EXIT_NUMERICAL,
        message: e.to_string(),
    })?;
    let rows: Vec<SweepRow> =
        pool.install(|| spec.values.par_iter().enumerate().map(run).collect());
    for (value, row) in &rows {
        if let Err(e) = row {
            eprintln!("{} = {value}: {e}", param.name());
        }
    }
    write_atomic(&out.join("summary.csv"), |f| {
        write_summary_csv(param, &rows, f)
    })
}

fn cmd_compare(path: &Path) -> CmdResult {
    let s = load(path, None)?;
    let report = compare(&s)?;
    println!("{report}");
    if report.pass() {
        Ok(())
    } else {
        let worst = report
            .rows
            .iter()
            .filter(|r| !r.pass())
            .max_by(|a, b| (a.rel_err / a.tolerance).total_cmp(&(b.rel_err / b.tolerance)))
            .expect("a failing row exists");
        Err(Failure {
            code: EXIT_COMPARE,
            message: format!(
                "tolerance exceeded: {} {} relative error {:.3e} > {:.0e} (residual {:.3e})",
                worst.model.name(),
                worst.quantity,
                worst.rel_err,
                worst.tolerance,
                worst.abs_err
            ),
        })
    }
}

/// Reduced fleet of 2 to 10 inverters with gains drawn from `seed`.
fn random_scenario(seed: u64) -> MicrogridScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=10);
    let inverters: Vec<InverterParams> = (1..=n)
        .map(|id| {
            InverterParams::new(id, rng.random_range(100.0..1000.0))
                .with_gains(rng.random_range(1.0..1000.0), rng.random_range(0.05..5.0))
                .with_gamma(mgsecsim::model::clock_offset_rad(
                    rng.random_range(-0.015..0.015),
                ))
                .with_power(
                    rng.random_range(0.0..3000.0),
                    -rng.random_range(0.0..3000.0),
                )
        })
        .collect();
    let k_t_min = inverters
        .iter()
        .map(|i| i.k_t)
        .fold(f64::INFINITY, f64::min);
    MicrogridScenario {
        omega_n: testbed::OMEGA_N,
        inverters,
        network: None,
        load_events: vec![],
        sim: SimSettings {
            dt: 1e-3,
            t_end: (30.0 / k_t_min).ceil(),
            initial_p_s: None,
            stride: 100,
        },
    }
}

fn cmd_scenario(out: &Path, seed: Option<u64>, k_s: f64, k_t: f64) -> CmdResult {
    let s = match seed {
        Some(seed) => random_scenario(seed),
        None => testbed::testbed_scenario(k_s, k_t),
    };
    let v = s.violations();
    if !v.is_empty() {
        return Err(Error::Validation(mgsecsim::ValidationErrors(v)).into());
    }
    let text = scenario_to_json(&s) + "\n";
    write_atomic(out, |f| Ok(f.write_all(text.as_bytes())?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            model,
            out,
            stride,
        } => cmd_simulate(&scenario, model.into(), &out, stride),
        Command::Predict {
            scenario,
            threshold,
        } => cmd_predict(&scenario, threshold),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
            model,
            stride,
        } => {
            let param = match param {
                ParamArg::KS => SweepParam::KS,
                ParamArg::KT => SweepParam::KT,
            };
            cmd_sweep(
                &scenario,
                param,
                values,
                &out,
                model.map(Into::into),
                stride,
            )
        }
        Command::Compare { scenario } => cmd_compare(&scenario),
        Command::Scenario {
            out,
            seed,
            k_s,
            k_t,
        } => cmd_scenario(&out, seed, k_s, k_t),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
