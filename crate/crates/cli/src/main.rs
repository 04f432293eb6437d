mod output;
mod riemann;
mod suite;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hj_core::orchestrator::run;
use hj_core::scenario::{Scenario, ScenarioConfig};
use hj_core::verify::convergence_study;
use hj_core::HjError;

use crate::suite::CheckName;

#[derive(Debug, Parser)]
#[command(name = "hj", version, about = "Hamilton-Jacobi solver with singular Neumann jumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a scenario and write snapshots, traces and a report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the check suite; exits 1 if any check fails.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated check names; defaults to every applicable check.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<CheckName>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Self-convergence study over successive halvings of h.
    Converge {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Built-in Riemann problems with their expected collapse behaviour.
    Riemann {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Clone, Copy, Default, Args)]
struct Overrides {
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    record_every: Option<f64>,
}

impl Overrides {
    fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(h) = self.h {
            config.numerics.h = h;
        }
        if let Some(cfl) = self.cfl {
            config.numerics.cfl = cfl;
        }
        if let Some(r) = self.record_every {
            config.numerics.record_every = r;
        }
    }
}

/// Error with the fingerprint of the scenario it came from, when known.
#[derive(Debug)]
pub(crate) struct Failure {
    fingerprint: Option<String>,
    message: String,
}

impl Failure {
    pub(crate) fn new(fingerprint: Option<&str>, message: impl fmt::Display) -> Self {
        Self {
            fingerprint: fingerprint.map(str::to_owned),
            message: message.to_string(),
        }
    }

    pub(crate) fn of(s: &Scenario) -> impl Fn(HjError) -> Self + '_ {
        move |e| Self::new(Some(s.fingerprint()), e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.fingerprint {
            Some(fp) => write!(f, "[{fp}] {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

pub(crate) type CliResult<T> = std::result::Result<T, Failure>;

pub(crate) fn load_config(text: &str, overrides: Overrides) -> CliResult<Scenario> {
    let mut config: ScenarioConfig =
        serde_json::from_str(text).map_err(|e| Failure::new(None, HjError::from(e)))?;
    overrides.apply(&mut config);
    let fp = config.fingerprint().map_err(|e| Failure::new(None, e))?;
    Scenario::from_config(config).map_err(|e| Failure::new(Some(&fp), e))
}

fn load(path: &Path, overrides: Overrides) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(None, format!("reading {}: {e}", path.display())))?;
    load_config(&text, overrides)
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("HJ_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Failure::new(None, format!("HJ_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(None, format!("thread pool: {e}")))
}

fn cmd_run(scenario: &Path, out: &Path, overrides: Overrides) -> CliResult<bool> {
    let s = load(scenario, overrides)?;
    let sol = run(&s).map_err(Failure::of(&s))?;
    output::write_run(out, &s, &sol)?;
    for j in &sol.jumps {
        let tau = j.tau.map_or_else(|| "open".to_string(), |t| format!("{t:.6}"));
        println!(
            "jump at x = {} ({:?}): J0 = {}, t_lower = {:.6}, tau = {tau}",
            j.x, j.sign, j.j0, j.t_lower
        );
    }
    println!("wrote {} records to {}", sol.records.len(), out.display());
    Ok(true)
}

fn cmd_check(scenario: &Path, out: Option<&Path>, checks: &[CheckName], overrides: Overrides) -> CliResult<bool> {
    let s = load(scenario, overrides)?;
    let reports = suite::run_checks(&s, checks).map_err(Failure::of(&s))?;
    let pass = reports.iter().all(|r| r.pass);
    match out {
        Some(dir) => {
            output::write_json(dir, "checks.json", &reports)?;
            for r in &reports {
                println!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.name);
            }
        }
        None => println!("{}", output::to_json(&reports)?),
    }
    Ok(pass)
}

fn cmd_converge(scenario: &Path, out: Option<&Path>, levels: usize, overrides: Overrides) -> CliResult<bool> {
    let s = load(scenario, overrides)?;
    let study = convergence_study(&s, levels).map_err(Failure::of(&s))?;
    print!("{}", output::rate_table(&study));
    println!("{} convergence", if study.report.pass { "PASS" } else { "FAIL" });
    if let Some(dir) = out {
        output::write_json(dir, "converge.json", &study)?;
    }
    Ok(study.report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Run {
            scenario,
            out,
            overrides,
        } => cmd_run(scenario, out, *overrides),
        Command::Check {
            scenario,
            out,
            checks,
            overrides,
        } => cmd_check(scenario, out.as_deref(), checks, *overrides),
        Command::Converge {
            scenario,
            out,
            levels,
            overrides,
        } => cmd_converge(scenario, out.as_deref(), *levels, *overrides),
        Command::Riemann { out, overrides } => riemann::cmd_riemann(out.as_deref(), *overrides),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
