use std::path::PathBuf;
use std::process::ExitCode;

use causticwave::arc1d::Method;
use causticwave::field2d::Parity;
use causticwave_cli::{CliError, PipelineConfig, Run, Stage};
use clap::{Parser, Subcommand};

/// Wavefunctions of integrable 2D Hamiltonians from their classical caustics.
#[derive(Debug, Parser)]
#[command(name = "causticwave", version)]
struct Cli {
    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Arc and field method: se, wkb or qhje.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Target quantum numbers: nodes along x, then along y.
    #[arg(long, global = true, num_args = 2, value_names = ["N1", "N2"])]
    state: Option<Vec<usize>>,
    /// x-parity of the combined field: even or odd.
    #[arg(long, global = true)]
    parity: Option<Parity>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Skip stages whose recorded outputs exist and match the inputs.
    #[arg(long, global = true)]
    resume: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the trajectory from the vertex and record caustic touchings.
    Trace,
    /// Fit the four caustic arcs.
    Caustic,
    /// Arc wavefunctions and actions at the converged energy.
    Arcs,
    /// Search energy and vertex for the target state.
    Eigensearch,
    /// Solve the 2D problem inside (and for SE outside) the caustic.
    Field,
    /// Diagonalize the Hamiltonian in an oscillator basis.
    Oracle,
    /// Compare the constructed field with the oracle eigenfunction.
    Compare,
    /// Run every stage in order.
    Pipeline,
}

fn config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut c = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = cli.method {
        c.search.method = m;
    }
    if let Some(s) = &cli.state {
        c.search.state = [s[0], s[1]];
    }
    if let Some(p) = cli.parity {
        c.search.parity = p;
    }
    if let Some(o) = &cli.out {
        c.output.dir = o.clone();
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut run = Run::new(config(cli)?, cli.resume)?;
    match cli.command {
        Command::Trace => run.run(Stage::Trace),
        Command::Caustic => run.run(Stage::Caustic),
        Command::Arcs => run.run(Stage::Arcs),
        Command::Eigensearch => run.run(Stage::Eigensearch),
        Command::Field => run.run(Stage::Field),
        Command::Oracle => run.run(Stage::Oracle),
        Command::Compare => run.run(Stage::Compare),
        Command::Pipeline => run.pipeline(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
