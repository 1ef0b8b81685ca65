use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ris_urllc::experiments::emit::{render, write_output};
use ris_urllc::experiments::{oracle, run_sweep, ConfigFile, ExperimentConfig, OutputFormat};
use ris_urllc::Error;

/// Refracting-RIS URLLC simulator for high-speed trains.
#[derive(Parser)]
#[command(name = "ris-urllc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write one row per sweep value and scheme.
    Run(RunArgs),
    /// Write mean sum rate per outer iteration.
    Trace(RunArgs),
    /// Parse and validate a config file.
    Validate { config: PathBuf },
    /// Run the closed-form and brute-force oracle checks.
    Oracle,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<i64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Validation(Error),
    Runtime(Error),
}

impl Failure {
    fn report(self) -> ExitCode {
        match self {
            Failure::Validation(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
            Failure::Runtime(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        }
    }
}

fn load(path: &Path) -> Result<ConfigFile, Failure> {
    ConfigFile::load(path).map_err(|e| match e {
        Error::Io { .. } => Failure::Runtime(e),
        other => Failure::Validation(other),
    })
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut file = load(&args.config)?;
    if let Some(seed) = args.seed {
        file.run.seed = seed;
    }
    if let Some(trials) = args.trials {
        file.run.trials = trials;
    }
    if let Some(out) = &args.out {
        file.run.out = Some(out.display().to_string());
    }
    if let Some(format) = &args.format {
        file.run.format = format.parse().map_err(Failure::Validation)?;
    }
    if let Some(threads) = args.threads {
        file.run.threads = Some(threads);
    }
    file.resolve().map_err(Failure::Validation)
}

fn run(args: &RunArgs, trace: bool) -> Result<(), Failure> {
    let cfg = resolve(args)?;
    let result = run_sweep(&cfg).map_err(Failure::Runtime)?;
    let text = render(&result, cfg.format, trace || cfg.is_trace()).map_err(Failure::Runtime)?;
    write_output(&text, cfg.out.as_deref().map(Path::new)).map_err(Failure::Runtime)?;
    let failed: usize = result.rows.iter().map(|r| r.failures).sum();
    if failed > 0 {
        eprintln!("warning: {failed} scheme runs failed and were excluded");
    }
    Ok(())
}

fn validate(path: &Path) -> Result<(), Failure> {
    let cfg = load(path)?.resolve().map_err(Failure::Validation)?;
    let format = match cfg.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    println!(
        "ok: sweep {} over {} value(s), {} scheme(s), {} trial(s), seed {}, format {format}",
        cfg.sweep_param,
        cfg.sweep_values.len(),
        cfg.schemes.len(),
        cfg.trials,
        cfg.root_seed
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => run(args, false),
        Command::Trace(args) => run(args, true),
        Command::Validate { config } => validate(config),
        Command::Oracle => {
            let checks = oracle::run_all();
            let mut all = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                all &= c.passed;
            }
            return if all { ExitCode::SUCCESS } else { ExitCode::from(2) };
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
