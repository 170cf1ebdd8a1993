//! `tracerec`: simulate deletion-channel traces, estimate subword
//! multiplicities, rebuild decks and reconstruct strings.
//!
//! Exit codes: 0 success, 1 algorithmic failure, 2 usage or parse error,
//! 3 resource limit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracerec_cli::args::*;
use tracerec_cli::commands;
use tracerec_cli::config::{load_config, overlay, ConfigFile};
use tracerec_cli::CliError;

#[derive(Debug, Parser)]
#[command(name = "tracerec", version, about = "Smoothed trace reconstruction over the deletion channel")]
struct Cli {
    /// TOML file with one table per subcommand; flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a trace file for a source string.
    Simulate(SimulateArgs),
    /// σ-perturb a string or a worst case.
    Perturb(PerturbArgs),
    /// Rebuild the k-deck from traces.
    Deck(DeckArgs),
    /// Assemble a string from a deck file.
    Assemble(AssembleArgs),
    /// Estimate how often a word occurs in the source.
    Multiplicity(MultiplicityArgs),
    /// Reconstruct a (perturbed) source end to end.
    Reconstruct(ReconstructArgs),
    /// Exact brute-force quantities for checking.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Sweep a parameter grid and print a JSON report.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Every trace with its probability.
    Distribution(DistributionArgs),
    /// Coefficients of the subword polynomial as `n k γ0 …`.
    Poly(PolyArgs),
    /// Expected count of a (gapped) pattern in a trace.
    Expectation(ExpectationArgs),
    /// Probability that kept positions γ land at gaps β.
    GammaBeta(GammaBetaArgs),
    /// Largest gap in the Taylor identity at the given points.
    Taylor(TaylorArgs),
    /// Fraction of perturbations that are k-good.
    Goodness(GoodnessArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("`threads` must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    let file = match &cli.config {
        Some(path) => load_config(path)?,
        None => ConfigFile::default(),
    };
    let oracle = file.oracle.unwrap_or_default();
    match cli.command {
        Command::Simulate(a) => commands::simulate(overlay(&a, file.simulate.as_ref())?),
        Command::Perturb(a) => commands::perturb(overlay(&a, file.perturb.as_ref())?),
        Command::Deck(a) => commands::deck(overlay(&a, file.deck.as_ref())?),
        Command::Assemble(a) => commands::assemble(overlay(&a, file.assemble.as_ref())?),
        Command::Multiplicity(a) => commands::multiplicity(overlay(&a, file.multiplicity.as_ref())?),
        Command::Reconstruct(a) => commands::reconstruct_cmd(overlay(&a, file.reconstruct.as_ref())?),
        Command::Experiment(a) => commands::experiment(overlay(&a, file.experiment.as_ref())?),
        Command::Oracle(o) => match o {
            OracleCommand::Distribution(a) => commands::distribution(overlay(&a, oracle.distribution.as_ref())?),
            OracleCommand::Poly(a) => commands::poly(overlay(&a, oracle.poly.as_ref())?),
            OracleCommand::Expectation(a) => commands::expectation(overlay(&a, oracle.expectation.as_ref())?),
            OracleCommand::GammaBeta(a) => commands::gamma_beta(overlay(&a, oracle.gamma_beta.as_ref())?),
            OracleCommand::Taylor(a) => commands::taylor(overlay(&a, oracle.taylor.as_ref())?),
            OracleCommand::Goodness(a) => commands::goodness(overlay(&a, oracle.goodness.as_ref())?),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
