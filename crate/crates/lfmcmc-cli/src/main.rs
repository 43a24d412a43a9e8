use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lfmcmc_cli::config::ExperimentConfig;
use lfmcmc_cli::figures::{figure_suite, FigureId};
use lfmcmc_cli::runner::{prior_predictive, run_experiment};
use lfmcmc_cli::CliError;

/// Likelihood-free MCMC experiment runner.
#[derive(Parser)]
#[command(name = "lfmcmc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run { config: PathBuf },
    /// Draw from a uniform box prior and simulate summaries at each draw.
    PriorPredictive { config: PathBuf },
    /// Reproduce a built-in experiment suite (fig2..fig6) as CSV datasets.
    Figure {
        /// Suite id: fig2, fig3, fig4, fig5 or fig6.
        id: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Multiplies iteration counts for desk-scale runs.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Output directory (defaults to $LFMCMC_OUT_DIR, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let config = ExperimentConfig::from_path(&config)?;
            let outputs = run_experiment(&config)?;
            println!("wrote {}", outputs.summary_path.display());
            for path in outputs.trace_paths {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::PriorPredictive { config } => {
            let config = ExperimentConfig::from_path(&config)?;
            let path = prior_predictive(&config)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Figure {
            id,
            seed,
            scale,
            out,
        } => {
            let id = FigureId::parse(&id)?;
            let out_dir = out
                .or_else(|| std::env::var("LFMCMC_OUT_DIR").ok().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let paths = figure_suite(id, seed, scale, &out_dir)?;
            for path in paths {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}
