use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qtomo::experiments::{fast_checks, find_preset, list_presets, run_experiment, ExperimentConfig};
use qtomo::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "qtomo", version, about = "Continuous-measurement tomography experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config or a named preset.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n_states: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// List presets, or print one as TOML.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
    /// Run the fast invariant suite.
    Check,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::InvalidSpin(_) | Error::InvalidDimension(_) => EXIT_CONFIG,
        Error::NotConverged { .. } => EXIT_SOLVER,
        _ => EXIT_FAILURE,
    }
}

fn load(config: Option<PathBuf>, preset: Option<String>) -> Result<ExperimentConfig, Error> {
    match (config, preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)
        }
        (None, Some(name)) => find_preset(&name)
            .map(|p| p.config)
            .ok_or_else(|| Error::Config(format!("unknown preset `{name}`; see `qtomo presets`"))),
        (None, None) => Err(Error::Config("pass --config or --preset".into())),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, preset, seed, out, n_states, steps, sigma } => {
            let mut cfg = load(config, preset)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_path = Some(o);
            }
            if n_states.is_some() {
                cfg.n_states = n_states;
            }
            if steps.is_some() {
                cfg.steps = steps;
            }
            if let Some(s) = sigma {
                cfg.sigma = s;
            }
            cfg.validate()?;
            let table = run_experiment(&cfg)?;
            match &cfg.output_path {
                Some(path) => eprintln!("wrote {} rows to {}", table.rows.len(), path.display()),
                None => print!("{}", table.to_csv_string()?),
            }
        }
        Command::Presets { show: Some(name) } => {
            let p = find_preset(&name).ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?;
            print!("{}", p.config.to_toml()?);
        }
        Command::Presets { show: None } => {
            for p in list_presets() {
                println!("{}\t{}", p.name, p.provenance);
            }
        }
        Command::Check => {
            let outcomes = fast_checks();
            for c in &outcomes {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = outcomes.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(Error::Consistency(format!("{failed} check(s) failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
