use std::fmt::Write as _;
use std::io::{self, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use hypertune::bench::{
    best_so_far, export_report, resolve_space, run_benchmark, BenchError, BenchmarkPlan,
    BenchmarkReport, ExportFormat,
};
use hypertune::objectives::{self, EvaluatorEndpoint, ExternalObjective, Objective};
use hypertune::strategies::{run, StrategyConfig, StrategyKind, TrialStatus};

#[derive(Parser)]
#[command(name = "hypertune", version, about = "Hyper-parameter optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a benchmark plan.
    Run {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect shipped search spaces.
    Spaces {
        #[command(subcommand)]
        action: SpacesAction,
    },
    /// Regenerate exports from a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "table")]
        format: ExportFormat,
    },
    /// Optimize once against an external evaluator.
    Evaluate {
        /// Space document path or catalog name.
        #[arg(long)]
        space: String,
        #[arg(long, default_value = "random")]
        strategy: StrategyKind,
        #[arg(long, default_value_t = 50)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker command line.
        #[arg(long)]
        worker: String,
        /// Per-trial timeout in seconds.
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
        #[arg(long, default_value_t = 3)]
        max_restarts: u32,
    },
}

#[derive(Subcommand)]
enum SpacesAction {
    List,
    Show { name: String },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(text) => match io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                eprintln!("hypertune: {e}");
                ExitCode::FAILURE
            }
            _ => ExitCode::SUCCESS,
        },
        Err(e) => {
            eprintln!("hypertune: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<String, Box<dyn std::error::Error>> {
    let mut out = String::new();
    match cli.command {
        Command::Run {
            plan,
            parallelism,
            out: out_dir,
        } => {
            let mut plan = BenchmarkPlan::load(&plan)?;
            if let Some(p) = parallelism {
                plan.parallelism = p;
            }
            if let Some(dir) = out_dir {
                plan.output = dir;
            }
            let result = run_benchmark(&plan)?;
            let table = export_report(&result.report, ExportFormat::Table)?;
            let traces = export_report(&result.report, ExportFormat::TraceRows)?;
            write(&plan.output.join("table.csv"), &table)?;
            write(&plan.output.join("trace_rows.csv"), &traces)?;
            out.push_str(&table);
            eprintln!(
                "{} cells executed, {} resumed, output in {}",
                result.executed,
                result.resumed,
                plan.output.display()
            );
        }
        Command::Spaces { action } => match action {
            SpacesAction::List => {
                for name in objectives::CATALOG_NAMES {
                    writeln!(out, "{name}\tcatalog")?;
                }
                for name in objectives::SYNTHETIC_NAMES {
                    writeln!(out, "{name}\tsynthetic")?;
                }
            }
            SpacesAction::Show { name } => {
                let space = match objectives::synthetic(&name) {
                    Ok(o) => o.space().clone(),
                    Err(_) => objectives::catalog(&name)?,
                };
                writeln!(out, "{}", space.to_document())?;
            }
        },
        Command::Report { input, format } => {
            let report = BenchmarkReport::load(&input)?;
            out.push_str(&export_report(&report, format)?);
        }
        Command::Evaluate {
            space,
            strategy,
            budget,
            seed,
            worker,
            timeout,
            max_restarts,
        } => {
            if !(timeout.is_finite() && timeout > 0.0) {
                return Err("timeout must be positive".into());
            }
            let space = resolve_space(&space)?;
            let endpoint =
                EvaluatorEndpoint::from_command_line(&worker, Duration::from_secs_f64(timeout), max_restarts)?;
            let mut objective = ExternalObjective::new(space.name().to_string(), space, endpoint);
            let config = StrategyConfig::new(strategy).with_seed(seed);
            let history = run(&config, &mut objective, budget)?;
            let trace = best_so_far(&history);
            writeln!(out, "trial,status,value,best_so_far,elapsed_s")?;
            for (t, best) in history.trials().iter().zip(&trace) {
                let status = match t.status {
                    TrialStatus::Ok => "ok",
                    TrialStatus::Failed => "failed",
                    TrialStatus::Pending => "pending",
                };
                let value = t.value.map(|v| v.to_string()).unwrap_or_default();
                let best = if best.is_finite() { best.to_string() } else { String::new() };
                writeln!(out, "{},{status},{value},{best},{}", t.id, t.elapsed)?;
            }
            match history.best() {
                Some(b) => eprintln!(
                    "best value {} at trial {}: {}",
                    b.score(),
                    b.id,
                    serde_json::to_string(&b.config)?
                ),
                None => eprintln!("no successful trials"),
            }
        }
    }
    Ok(out)
}

fn write(path: &std::path::Path, text: &str) -> Result<(), BenchError> {
    std::fs::write(path, text).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}
