use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use relbc_core::config::{parse_override, RunConfig};
use relbc_core::report::{cmd_attack, cmd_bound, cmd_geometry, cmd_run, Report};
use relbc_core::Error;

/// Relativistic quantum bit commitment: honest runs, security bounds,
/// light-cone geometry and attacks.
#[derive(Parser, Debug)]
#[command(name = "relbc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed. Required by `run` and `attack`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Repetitions for `run`.
    #[arg(long, global = true)]
    reps: Option<u64>,

    /// Where to write the JSON report.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override one config key, e.g. `--set security.n_tol=150`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Honest protocol runs, one table row per repetition.
    Run,
    /// The binding bound, optionally swept over n_tol.
    Bound,
    /// Commitment-time bound and exclusions for given reveal timings.
    Geometry,
    /// One cheating strategy over many trials.
    Attack,
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            RunConfig::from_text(&text)?
        }
        None => RunConfig::default(),
    };
    for item in &cli.overrides {
        let (key, value) = parse_override(item)?;
        cfg.set(&key, &value)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(reps) = cli.reps {
        cfg.reps = reps;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.resolve()
}

fn execute(cli: &Cli) -> Result<(Report, RunConfig), Error> {
    let cfg = load(cli)?;
    let report = match cli.command {
        Command::Run => cmd_run(&cfg)?,
        Command::Bound => cmd_bound(&cfg)?,
        Command::Geometry => cmd_geometry(&cfg)?,
        Command::Attack => cmd_attack(&cfg)?,
    };
    Ok((report, cfg))
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(|e| Error::Config {
        path: path.display().to_string(),
        reason: format!("cannot write: {e}"),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = execute(&cli).and_then(|(report, cfg)| {
        if let Some(path) = &cfg.out {
            write_file(path, report.json_text().as_bytes())?;
        }
        if let (Some(path), Some(bytes)) = (&cfg.transcript, &report.transcript) {
            write_file(path, bytes)?;
        }
        Ok(report)
    });
    match result {
        Ok(report) => {
            print!("{}", report.table);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 2 } else { 1 })
        }
    }
}
