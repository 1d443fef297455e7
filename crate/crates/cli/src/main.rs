use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mmsgeo_cli::config::{ExperimentConfig, Level, Params, SpaceSpec, Task};
use mmsgeo_cli::suites::{run_suite, SUITES};
use mmsgeo_cli::{run, CliError};

/// Numerical checks of perimeter, Minkowski content, coarea and gauge measures
/// on sampled metric measure spaces.
///
/// Exit status: 0 all verdicts pass, 2 a verdict failed, 3 configuration error,
/// 4 runtime error.
#[derive(Debug, Parser)]
#[command(name = "mmsgeo", version)]
struct Cli {
    /// Task to run; `repro` runs a named suite.
    #[arg(value_enum, required_unless_present = "list_suites")]
    task: Option<Task>,
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config file, which overrides `MMSGEO_OUT`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Caps the worker threads of the numerical kernels.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Space for `verify` without a config: three-point, interval[:n], square[:n],
    /// disk-box[:n], circle[:n], fat-cantor[:n] or a TOML file with a [space] section.
    #[arg(long)]
    space: Option<String>,
    #[arg(long, value_enum)]
    level: Option<Level>,
    /// Suite for `repro`.
    #[arg(long)]
    suite: Option<String>,
    /// Lists the repro suites and exits.
    #[arg(long)]
    list_suites: bool,
}

const DEFAULT_OUT: &str = "mmsgeo-out";
const OUT_ENV: &str = "MMSGEO_OUT";

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("mmsgeo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    if cli.list_suites {
        for (name, about) in SUITES {
            println!("{name:<12} {about}");
        }
        return Ok(true);
    }
    let task = cli.task.expect("clap enforces a task");
    let file = cli.config.as_deref().map(ExperimentConfig::load).transpose()?;
    if let Some(f) = &file {
        if f.task != task {
            return Err(CliError::Config(format!(
                "config declares task `{}` but `{}` was requested",
                f.task.name(),
                task.name()
            )));
        }
    }
    let out = cli
        .out
        .clone()
        .or_else(|| file.as_ref().and_then(|f| f.output.clone()))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    if task == Task::Repro {
        let suite = cli
            .suite
            .clone()
            .or_else(|| file.as_ref().and_then(|f| f.params.suite.clone()))
            .ok_or_else(|| CliError::Config("repro needs --suite or params.suite".into()))?;
        let seed = cli.seed.or(file.as_ref().map(|f| f.seed)).unwrap_or(0);
        let (outcome, _) = run_suite(&suite, &out, cli.workers, seed)?;
        for (name, pass, secs) in &outcome.entries {
            println!("{} {name} ({secs:.2} s)", if *pass { "PASS" } else { "FAIL" });
        }
        return Ok(outcome.passed);
    }

    let mut cfg = match file {
        Some(f) => f,
        None if task == Task::Verify => {
            let spec = cli.space.as_deref().ok_or_else(|| CliError::Config("verify needs --space or --config".into()))?;
            ExperimentConfig {
                task,
                seed: 0,
                output: None,
                space: Some(SpaceSpec::from_short(spec)?),
                set: None,
                field: None,
                params: Params::default(),
            }
        }
        None => return Err(CliError::Config(format!("task `{}` needs --config", task.name()))),
    };
    if let Some(spec) = &cli.space {
        cfg.space = Some(SpaceSpec::from_short(spec)?);
    }
    if let Some(level) = cli.level {
        cfg.params.level = Some(level);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let record = run(&cfg, &out, cli.workers)?;
    for v in &record.verdicts {
        let status = if v.pass {
            "PASS"
        } else if v.informational {
            "INFO"
        } else {
            "FAIL"
        };
        println!("{status} {:<40} measured {:<14.6e} bound {:<14.6e} slack {:.3e}", v.name, v.measured, v.bound, v.slack);
    }
    println!("wrote {} artifacts to {} in {:.2} s", record.artifacts.len(), out.display(), record.wall_time_s);
    Ok(record.passed)
}
