use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fermi_blocks_cli::{
    cmd_element, cmd_gen_model, cmd_hf, cmd_pipeline, cmd_sweep, cmd_verify, CliError, CliResult, RunConfig, Scope,
    VerifyCaps,
};

#[derive(Parser)]
#[command(name = "fermi-blocks", version, about = "Block-diagonal fermionic Hamiltonians from pair matrices")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the model seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write K.mat, K_dummy.mat and W.pairmat.
    GenModel,
    /// Hartree-Fock orbitals from the model files in the output directory.
    Hf,
    /// Model, dummy matrix, truncation, blocks and spectra.
    Pipeline,
    /// Spectral drift for every truncation index.
    Sweep,
    /// A single matrix element.
    Element {
        #[arg(long = "nprime")]
        n_prime: String,
        #[arg(long)]
        n: String,
        /// Read E from this file instead of building it.
        #[arg(long)]
        pairmat: Option<PathBuf>,
        /// Truncate E before evaluating.
        #[arg(long)]
        alpha_bar: Option<usize>,
    },
    /// Self-checks against brute-force references.
    Verify {
        #[arg(long, default_value = "all")]
        scope: Scope,
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        pairmat: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        config.out = out;
    }
    if let Some(seed) = cli.seed {
        config.params.seed = seed;
    }
    config.validate()?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::GenModel => cmd_gen_model(&config, &mut out).map(drop),
        Command::Hf => cmd_hf(&config, &mut out).map(drop),
        Command::Pipeline => cmd_pipeline(&config, &mut out).map(drop),
        Command::Sweep => cmd_sweep(&config, &mut out).map(drop),
        Command::Element { n_prime, n, pairmat, alpha_bar } => {
            cmd_element(&config, &n_prime, &n, pairmat.as_deref(), alpha_bar, &mut out).map(drop)
        }
        Command::Verify { scope, modes, particles, pairmat } => {
            cmd_verify(&config, scope, VerifyCaps { modes, particles }, pairmat.as_deref(), &mut out).map(drop)
        }
    }?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fermi-blocks: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
