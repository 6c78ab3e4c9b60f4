use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use redsim::check::{run_checks, CheckOptions};
use redsim::ensemble::{analytic_expectation, run_ensemble};
use redsim::oracle::brute_force_oracle;
use redsim::trace::trace;
use redsim_core::catalog::{build, ScenarioKind, ScenarioParams};
use redsim_core::CompiledScenario;

#[derive(Parser)]
#[command(name = "redsim", version, about = "Stochastic state-reduction simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo ensemble and print or write the JSON report.
    Run {
        /// Scenario file (.rsl) or catalog scenario name.
        scenario: String,
        /// Number of trajectories [default: the scenario's run clause].
        #[arg(long)]
        runs: Option<u64>,
        /// Master seed [default: the scenario's run clause].
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads [default: available cores].
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compare against the oracle when no closed form is known.
        #[arg(long)]
        oracle: bool,
        /// Oracle step [default: a tenth of the scenario's dt].
        #[arg(long)]
        dt_fine: Option<f64>,
    },
    /// Record one trajectory as CSV: t, each label's weight, hazard.
    Trace {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Which run of the seed's stream to trace.
        #[arg(long, default_value_t = 0)]
        run: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print outcome probabilities from the brute-force oracle as JSON.
    Oracle {
        scenario: String,
        #[arg(long)]
        dt_fine: Option<f64>,
    },
    /// Run the invariant suite over the catalog.
    Check {
        #[arg(long, default_value_t = 2000)]
        runs: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        /// Skip the oracle comparisons.
        #[arg(long)]
        no_oracle: bool,
    },
    /// List the catalog scenarios.
    Scenarios,
}

enum Failure {
    /// Rule violations or failed checks.
    Check(String),
    Diagnostics(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load(arg: &str) -> Result<CompiledScenario, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Ok(kind) = arg.parse::<ScenarioKind>() {
            return build(kind, &ScenarioParams::for_kind(kind)).map_err(|e| Failure::Runtime(e.into()));
        }
    }
    let source = fs::read_to_string(path).with_context(|| format!("cannot read scenario `{arg}`"))?;
    match redsim_dsl::compile(&source) {
        Ok(compiled) => {
            if !compiled.warnings.is_empty() {
                eprint!("{}", redsim_dsl::render(&compiled.warnings));
            }
            Ok(compiled.scenario)
        }
        Err(diags) => Err(Failure::Diagnostics(redsim_dsl::render(&diags))),
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("cannot write to stdout"),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, runs, seed, workers, out, oracle, dt_fine } => {
            let sc = load(&scenario)?;
            let cfg = sc.run_config();
            let (runs, seed) = (runs.unwrap_or(cfg.runs), seed.unwrap_or(cfg.seed));
            let mut report = run_ensemble(&sc, runs, seed, workers.unwrap_or_else(default_workers))
                .map_err(|e| Failure::Runtime(e.into()))?;
            if let Some(expected) = analytic_expectation(&sc) {
                report.set_expected("analytic", &expected);
            } else if oracle {
                let o = brute_force_oracle(&sc, dt_fine.unwrap_or(cfg.dt / 10.0)).map_err(anyhow::Error::from)?;
                report.set_expected("oracle", &o.probabilities);
            }
            emit(out.as_deref(), &report.to_json())?;
            eprintln!("{runs} runs in {:.2} s", report.wall_clock_seconds);
            if !report.matches_expected() {
                eprintln!("warning: some outcome frequencies are more than 3 sigma from the expected values");
            }
            if report.violations.total() > 0 {
                return Err(Failure::Check(format!("rule violations: {:?}", report.violations)));
            }
            Ok(())
        }
        Command::Trace { scenario, seed, run, out } => {
            let sc = load(&scenario)?;
            let tr = trace(&sc, seed.unwrap_or(sc.run_config().seed), run).map_err(anyhow::Error::from)?;
            let mut buf = Vec::new();
            tr.write_csv(&mut buf).map_err(anyhow::Error::from)?;
            emit(out.as_deref(), std::str::from_utf8(&buf).expect("CSV output is UTF-8"))?;
            Ok(())
        }
        Command::Oracle { scenario, dt_fine } => {
            let sc = load(&scenario)?;
            let o = brute_force_oracle(&sc, dt_fine.unwrap_or(sc.run_config().dt / 10.0))
                .map_err(anyhow::Error::from)?;
            let mut text = serde_json::to_string_pretty(&o.probabilities).map_err(anyhow::Error::from)?;
            text.push('\n');
            emit(None, &text)?;
            eprintln!("dt_fine {} over {} steps, at most {} branches", o.dt_fine, o.steps, o.peak_branches);
            Ok(())
        }
        Command::Check { runs, seed, workers, no_oracle } => {
            let opts = CheckOptions { runs, seed, workers: workers.unwrap_or_else(default_workers), oracle: !no_oracle };
            let results = run_checks(&opts);
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(Failure::Check(format!("{failed} of {} checks failed", results.len())));
            }
            println!("all {} checks passed", results.len());
            Ok(())
        }
        Command::Scenarios => {
            for kind in ScenarioKind::ALL {
                println!("{:<22} {}", kind.name(), kind.description());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Diagnostics(text)) => {
            eprint!("{text}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
