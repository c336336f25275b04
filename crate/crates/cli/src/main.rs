//! `sparsekern`: fit sparse random feature models on CSV data and run the reproduction studies.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod args;
mod model;
mod study;

/// Sparse random features, additive kernels and ridge readouts.
#[derive(Parser, Debug)]
#[command(name = "sparsekern", version, about)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, env = "SPARSEKERN_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a ridge readout on sparse random features of a CSV dataset.
    Fit(model::FitArgs),
    /// Predict with a saved model.
    Predict(model::PredictArgs),
    /// Run a reproduction study and write `<name>.csv` and `<name>.meta.json`.
    #[command(subcommand)]
    Study(study::StudyCommand),
}

/// Weight and bias options shared by feature-building commands.
#[derive(Args, Debug, Clone)]
pub struct FeatureArgs {
    /// Weight law: gaussian, gaussian-scaled (variance sigma^2/d) or rademacher.
    #[arg(long, default_value = "gaussian")]
    pub weights: String,

    /// Weight standard deviation (or Rademacher magnitude).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,

    /// Bias law: none, phase (uniform on [-pi, pi]), sym:<a> or uniform:<a1>,<a2>.
    /// Defaults to phase for cosine and sincos, none otherwise.
    #[arg(long)]
    pub bias: Option<String>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build()?;
    pool.install(|| match cli.command {
        Command::Fit(a) => model::fit(&a, cli.seed, &cli.out_dir),
        Command::Predict(a) => model::predict(&a),
        Command::Study(s) => study::run(s, cli.seed, &cli.out_dir),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(args::exit_code(&e))
        }
    }
}
