//! `airnet` command-line front end.
//!
//! Exit codes: 0 success, 1 domain failure (invalid network or weather,
//! non-convergence), 2 I/O or usage error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::{json, Value};

use airnet::network::NetworkError;
use airnet::report::{compare, write_atomic, CompareError};
use airnet::scenario::{
    parse_weather, run_simulation, summarize, synthetic_weather, write_timesteps, write_weather,
};
use airnet::{parse_network, solve, BoundaryState, Network, SolveError, SolverConfig, Strategy};

#[derive(Parser)]
#[command(name = "airnet", version, about = "Multizone airflow network solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a network file.
    Check {
        #[arg(long)]
        network: PathBuf,
    },
    /// Solve one steady state and print the result as JSON.
    Solve {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, default_value = "pwm")]
        strategy: Strategy,
        /// Wind speed, m/s.
        #[arg(long, default_value_t = 0.0)]
        wind_speed: f64,
        /// Wind direction, degrees clockwise from north.
        #[arg(long, default_value_t = 0.0)]
        wind_dir: f64,
        /// Outdoor temperature, °C.
        #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
        temp_out_c: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve every record of a weather file with one strategy.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        weather: PathBuf,
        #[arg(long, default_value = "pwm")]
        strategy: Strategy,
        /// Timestep CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run several strategies over one weather file and compare iteration counts.
    Compare {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        weather: PathBuf,
        /// Strategies to compare (repeat or comma-separate); all four by default.
        #[arg(long, value_delimiter = ',')]
        strategy: Vec<Strategy>,
        /// Output prefix: writes `<out>_timesteps.csv`, `<out>_iterations.csv`
        /// and `<out>_summary.json`.
        #[arg(long, default_value = "airnet")]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Write a seeded synthetic weather file.
    GenWeather {
        #[arg(long, default_value_t = 10)]
        days: u32,
        #[arg(long, default_value_t = 30)]
        step_min: u32,
        #[arg(long, default_value_t = 1998)]
        seed: u64,
        /// Weather CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolverArgs {
    /// Solver settings as JSON, either a bare config object or a comparison
    /// summary (its `config` and `warm_start` fields are used). Flags below
    /// override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Convergence tolerance on every zone's mass balance, kg/s.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    picard_iters: Option<usize>,
    /// Picard damping factor a.
    #[arg(long)]
    accel: Option<f64>,
    /// Largest Picard pressure change per iteration, Pa.
    #[arg(long)]
    trunc_pa: Option<f64>,
    /// Fixed relaxation factor of plain Newton.
    #[arg(long)]
    relax: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Start every step from zero pressures instead of the previous solution.
    #[arg(long)]
    no_warm_start: bool,
}

enum Failure {
    Domain(String),
    Usage(String),
    /// Already reported on stderr.
    Reported,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) | Failure::Reported => 1,
            Failure::Usage(_) => 2,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn io_error(path: &Path, e: io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(bytes: &[u8]) -> CmdResult {
    match io::stdout().lock().write_all(bytes) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
            Err(Failure::Usage(format!("stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn emit_json(value: &Value) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).expect("json");
    text.push('\n');
    emit(text.as_bytes())
}

fn load_network(path: &Path) -> Result<Network, Failure> {
    parse_network(&read(path)?).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

impl SolverArgs {
    /// Solver configuration and warm-start flag.
    fn settings(&self) -> Result<(SolverConfig, bool), Failure> {
        let mut warm_start = true;
        let mut cfg = match &self.config {
            None => SolverConfig::default(),
            Some(path) => {
                let text = read(path)?;
                let value: Value = serde_json::from_str(&text)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                if let Some(w) = value.get("warm_start").and_then(Value::as_bool) {
                    warm_start = w;
                }
                let inner = value.get("config").cloned().unwrap_or(value);
                serde_json::from_value(inner)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
            }
        };
        if self.no_warm_start {
            warm_start = false;
        }
        if let Some(v) = self.tol {
            cfg.tolerance = v;
        }
        if let Some(v) = self.picard_iters {
            cfg.picard_iters = v;
        }
        if let Some(v) = self.accel {
            cfg.accel = v;
        }
        if let Some(v) = self.trunc_pa {
            cfg.trunc_dp_max = v;
        }
        if let Some(v) = self.relax {
            cfg.fixed_relax = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_newton_iters = v;
        }
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok((cfg, warm_start))
    }
}

fn check(network: &Path) -> CmdResult {
    let text = read(network)?;
    match parse_network(&text) {
        Ok(net) => emit(
            format!(
                "OK: {} zones, {} external nodes, {} links\n",
                net.zones.len(),
                net.external_nodes.len(),
                net.links.len()
            )
            .as_bytes(),
        ),
        Err(NetworkError::Invalid(violations)) => {
            for v in &violations {
                eprintln!("{v}");
            }
            Err(Failure::Domain(format!(
                "{} violation(s) in {}",
                violations.len(),
                network.display()
            )))
        }
        Err(e) => Err(Failure::Domain(format!("{}: {e}", network.display()))),
    }
}

fn solve_diagnostics(e: &SolveError, zone_ids: &[&str]) -> Value {
    let mut v = json!({ "error": e.kind(), "message": e.to_string(), "zone_ids": zone_ids });
    match e {
        SolveError::NonConvergence {
            iterations,
            max_residual,
            pressures,
            picard_iters_used,
            picard_aborted,
        } => {
            v["newton_iters"] = json!(iterations);
            v["max_residual"] = json!(max_residual);
            v["pressures"] = json!(pressures);
            v["picard_iters_used"] = json!(picard_iters_used);
            v["picard_aborted"] = json!(picard_aborted);
        }
        SolveError::SingularJacobian {
            iteration,
            pressures,
            picard_iters_used,
            picard_aborted,
        } => {
            v["newton_iters"] = json!(iteration);
            v["pressures"] = json!(pressures);
            v["picard_iters_used"] = json!(picard_iters_used);
            v["picard_aborted"] = json!(picard_aborted);
        }
        _ => {}
    }
    v
}

fn cmd_solve(
    network: &Path,
    strategy: Strategy,
    bc: BoundaryState,
    solver: &SolverArgs,
) -> CmdResult {
    let net = load_network(network)?;
    let (cfg, _) = solver.settings()?;
    let ids = net.zone_ids();
    let p0 = vec![0.0; net.zones.len()];
    match solve(&net, &bc, &p0, strategy, &cfg) {
        Ok(outcome) => {
            let mut v = serde_json::to_value(&outcome).expect("outcome serializes");
            v["zone_ids"] = json!(ids);
            v["config"] = json!(cfg);
            emit_json(&v)
        }
        Err(e) => {
            let diag = solve_diagnostics(&e, &ids);
            eprintln!("{}", serde_json::to_string_pretty(&diag).expect("json"));
            Err(Failure::Reported)
        }
    }
}

fn load_weather(path: &Path) -> Result<Vec<airnet::scenario::WeatherRecord>, Failure> {
    parse_weather(&read(path)?).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

fn cmd_simulate(
    network: &Path,
    weather: &Path,
    strategy: Strategy,
    out: Option<&Path>,
    solver: &SolverArgs,
) -> CmdResult {
    let net = load_network(network)?;
    let weather = load_weather(weather)?;
    let (cfg, warm_start) = solver.settings()?;
    let records = run_simulation(&net, &weather, strategy, &cfg, warm_start)
        .map_err(|e| Failure::Domain(e.to_string()))?;
    let mut buf = Vec::new();
    write_timesteps(&records, &net.zone_ids(), &mut buf)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    match out {
        Some(path) => {
            write_atomic(path, &buf).map_err(|e| io_error(path, e))?;
            let summary = summarize(&records).expect("weather is non-empty");
            emit_json(&json!(summary))?;
        }
        None => emit(&buf)?,
    }
    let failures = records.iter().filter(|r| !r.converged()).count();
    info!("{} steps, {failures} failed", records.len());
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    prefix.with_file_name(name)
}

fn cmd_compare(
    network: &Path,
    weather: &Path,
    strategies: &[Strategy],
    out: &Path,
    solver: &SolverArgs,
) -> CmdResult {
    let strategies = if strategies.is_empty() {
        &Strategy::ALL[..]
    } else {
        strategies
    };
    let net = load_network(network)?;
    let weather = load_weather(weather)?;
    let (cfg, warm_start) = solver.settings()?;
    let report = compare(&net, &weather, strategies, &cfg, warm_start).map_err(|e| match e {
        CompareError::TooFewStrategies => Failure::Usage(e.to_string()),
        other => Failure::Domain(other.to_string()),
    })?;

    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let files = [
        (with_suffix(out, "_timesteps.csv"), report.long_csv()),
        (with_suffix(out, "_iterations.csv"), report.wide_csv()),
        (
            with_suffix(out, "_summary.json"),
            report.summary_json().into_bytes(),
        ),
    ];
    for (path, bytes) in &files {
        write_atomic(path, bytes).map_err(|e| io_error(path, e))?;
        info!("wrote {}", path.display());
    }

    let mut table = String::from("strategy  mean_newton  mean_with_picard  in_picard  failures\n");
    for s in &report.summaries {
        table += &format!(
            "{:<8}  {:>11.2}  {:>16.2}  {:>8.1}%  {:>8}\n",
            s.strategy.label(),
            s.mean_newton_iters,
            s.mean_iters_with_picard,
            s.converged_in_picard_pct,
            s.failures
        );
    }
    emit(table.as_bytes())
}

fn cmd_gen_weather(days: u32, step_min: u32, seed: u64, out: Option<&Path>) -> CmdResult {
    if days == 0 || step_min == 0 {
        return Err(Failure::Usage(
            "--days and --step-min must be positive".into(),
        ));
    }
    let records = synthetic_weather(days, step_min, seed);
    let mut buf = Vec::new();
    write_weather(&records, &mut buf).map_err(|e| Failure::Usage(e.to_string()))?;
    match out {
        Some(path) => write_atomic(path, &buf).map_err(|e| io_error(path, e)),
        None => emit(&buf),
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Check { network } => check(&network),
        Command::Solve {
            network,
            strategy,
            wind_speed,
            wind_dir,
            temp_out_c,
            solver,
        } => {
            if wind_speed < 0.0 {
                return Err(Failure::Usage("--wind-speed must not be negative".into()));
            }
            let bc = BoundaryState::new(wind_speed, wind_dir, temp_out_c + 273.15);
            cmd_solve(&network, strategy, bc, &solver)
        }
        Command::Simulate {
            network,
            weather,
            strategy,
            out,
            solver,
        } => cmd_simulate(&network, &weather, strategy, out.as_deref(), &solver),
        Command::Compare {
            network,
            weather,
            strategy,
            out,
            solver,
        } => cmd_compare(&network, &weather, &strategy, &out, &solver),
        Command::GenWeather {
            days,
            step_min,
            seed,
            out,
        } => cmd_gen_weather(days, step_min, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AIRNET_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Domain(msg) | Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Reported => {}
            }
            ExitCode::from(f.code())
        }
    }
}
