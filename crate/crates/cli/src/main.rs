//! `mipt`: sweeps of the periodically measured transverse-field Ising chain.
//!
//! Exit status is 0 on success, 1 for invalid configuration or I/O trouble,
//! and 2 when a computation breaks down numerically or a validation check
//! fails.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Output;
use crate::config::Common;
use crate::output::{emit, render};

#[derive(Debug, Parser)]
#[command(name = "mipt", version, about = "Survival and entanglement under repeated global measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Survival probability R_n and first-detection probability p_n.
    Survival(Common),
    /// Bipartite entropy, GGM and survival-weighted GGM per step.
    Entanglement(Common),
    /// Plateau height H(tau), its slope and the steepest point tau_c.
    Transition(Common),
    /// Finite-size collapse of dH/dsigma or of the entropy.
    Collapse(Common),
    /// Cross-engine, oracle and invariant self-checks.
    Validate(Common),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(mipt_core::Error),
    ChecksFailed(usize),
}

impl From<mipt_core::Error> for CliError {
    fn from(e: mipt_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => 2,
            CliError::ChecksFailed(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::ChecksFailed(n) => write!(f, "{n} validation check(s) failed"),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Survival(c)
        | Command::Entanglement(c)
        | Command::Transition(c)
        | Command::Collapse(c)
        | Command::Validate(c) => c.clone().with_file()?,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut failed = 0;
    let (cfg, out) = match cli.command {
        Command::Survival(_) => commands::survival(&common)?,
        Command::Entanglement(_) => commands::entanglement(&common)?,
        Command::Transition(_) => commands::transition(&common)?,
        Command::Collapse(_) => commands::collapse(&common)?,
        Command::Validate(_) => {
            let (cfg, out, n) = commands::validate(&common)?;
            failed = n;
            (cfg, out)
        }
    };
    let bytes = match &out {
        Output::Survival(t) => render(t, &cfg)?,
        Output::Entanglement(t) => render(t, &cfg)?,
        Output::Transition(t) => render(t, &cfg)?,
        Output::Collapse(t) => render(t, &cfg)?,
        Output::Validate(t) => render(t, &cfg)?,
    };
    emit(&bytes, common.out.as_deref())?;
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mipt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
