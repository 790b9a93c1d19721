use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use roughman::roughpath::{uniform_grid, validate_driver};
use roughman::scenario::{
    convergence_sweep, run_scenario, write_outputs, Artifact, DriverCheckConfig, OutputFormat,
    ScenarioConfig, ScenarioName,
};
use roughman::Error;

const DEFAULT_OUT: &str = "roughman_out";

#[derive(Parser)]
#[command(name = "roughman", version, about = "Rough differential equations on manifolds: scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trajectories and report.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run the convergence sweep described in a scenario config.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check Chen, unit and Lie defects and Hölder constants of a driver.
    ValidateDriver {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

#[derive(Args)]
struct RunOpts {
    /// Output directory (overrides the config).
    #[arg(long, env = "ROUGHMAN_OUT")]
    out: Option<PathBuf>,
    /// Solver mesh: 2^k steps per unit time.
    #[arg(long, value_name = "k", value_parser = clap::value_parser!(u32).range(0..=22))]
    mesh: Option<u32>,
    /// Seed for randomized checks.
    #[arg(long, value_name = "s")]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(_) | Error::Config { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Print to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn read_config(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(path: &Path, opts: &RunOpts) -> Result<(ScenarioConfig, PathBuf), Failure> {
    let mut cfg = ScenarioConfig::from_json(&read_config(path)?)?;
    cfg.name()?;
    if let Some(k) = opts.mesh {
        let mut s = cfg.solver.clone().unwrap_or_default();
        s.steps_per_unit = 1usize << k;
        cfg.solver = Some(s);
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(f) = opts.format {
        cfg.output.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    let out = out_dir(opts, cfg.output.dir.as_deref());
    Ok((cfg, out))
}

fn out_dir(opts: &RunOpts, from_config: Option<&str>) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| from_config.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn run(path: &Path, opts: &RunOpts) -> Result<bool, Failure> {
    let (cfg, out) = load_scenario(path, opts)?;
    let outcome = run_scenario(&cfg)?;
    emit(&outcome.report.summary());
    let files = write_outputs(&out, &outcome.report, &outcome.artifacts, cfg.output.format)?;
    emit(&format!("  wrote {} files under {}\n", files.len(), out.join(&outcome.report.scenario).display()));
    Ok(outcome.report.pass())
}

fn sweep(path: &Path, opts: &RunOpts) -> Result<bool, Failure> {
    let (cfg, out) = load_scenario(path, opts)?;
    let rep = convergence_sweep(&cfg)?;
    let table = rep.table();
    emit(&table.to_csv());
    match rep.slope {
        Some(s) => emit(&format!("fitted slope {s:.4}\n")),
        None => emit("fitted slope N/A (single row)\n"),
    }
    let dir = out.join(&rep.scenario);
    fs::create_dir_all(&dir).map_err(Error::from)?;
    let (name, body) = Artifact::table("sweep", table).render(cfg.output.format);
    fs::write(dir.join(name), body).map_err(Error::from)?;
    let json = serde_json::to_string_pretty(&rep).map_err(Error::from)? + "\n";
    fs::write(dir.join("sweep_report.json"), json).map_err(Error::from)?;
    Ok(rep.rows.iter().all(|r| r.error.is_finite()))
}

fn check_driver(path: &Path, opts: &RunOpts) -> Result<bool, Failure> {
    let mut cfg = DriverCheckConfig::from_json(&read_config(path)?)?;
    if let Some(s) = opts.seed {
        cfg.validation.seed = s;
    }
    let driver = cfg.driver.build()?;
    let grid = uniform_grid(0.0, driver.horizon(), cfg.grid_points);
    let rep = validate_driver(driver.as_ref(), &grid, &cfg.validation)?;
    let json = serde_json::to_string_pretty(&rep).map_err(Error::from)? + "\n";
    emit(&json);
    let dir = out_dir(opts, None).join("validate_driver");
    fs::create_dir_all(&dir).map_err(Error::from)?;
    fs::write(dir.join("report.json"), json).map_err(Error::from)?;
    Ok(rep.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ListScenarios => {
            for s in ScenarioName::ALL {
                emit(&format!("{:<28} {}\n", s.as_str(), s.description()));
            }
            Ok(true)
        }
        Command::Run { config, opts } => run(config, opts),
        Command::Sweep { config, opts } => sweep(config, opts),
        Command::ValidateDriver { config, opts } => check_driver(config, opts),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
