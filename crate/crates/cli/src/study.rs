//! `study convergence | polytest | stability | eigen`.

use std::path::Path;

use clap::{Args, Subcommand};

use sparsekern::experiments::convergence::{self, ConvergenceConfig};
use sparsekern::experiments::corruption::{self, CorruptionMode, CorruptionSpec, EigenConfig, StabilityConfig};
use sparsekern::experiments::polytest::{self, CvScheme, PolytestConfig, WeightVariance};
use sparsekern::experiments::{convergence_study, eigen_study, polytest_study, stability_study, StudyOutput};

use crate::args::{self, invalid};
use crate::FeatureArgs;

#[derive(Subcommand, Debug)]
pub enum StudyCommand {
    /// Sup-norm error of empirical kernels against their limit as m grows.
    Convergence(ConvergenceArgs),
    /// Test MSE by feature degree and training size on a polynomial target.
    Polytest(PolytestArgs),
    /// Regression scores on linear data with sparsely corrupted inputs.
    Stability(StabilityArgs),
    /// Gram eigenvalue amplification under input corruption.
    Eigen(EigenArgs),
}

#[derive(Args, Debug)]
pub struct ConvergenceArgs {
    /// Input dimension.
    #[arg(long, default_value_t = 8)]
    l: usize,

    /// Degree law (see `fit --help`).
    #[arg(long, default_value = "dense")]
    degree: String,

    #[arg(long, default_value = "cosine")]
    nonlinearity: String,

    /// Feature counts, comma separated.
    #[arg(long, default_value = "256,1024,4096,16384")]
    m_grid: String,

    /// Number of probe pairs.
    #[arg(long, default_value_t = 200)]
    probes: usize,

    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
pub struct PolytestArgs {
    #[arg(long, default_value_t = 16)]
    l: usize,

    /// Regular degrees, comma separated.
    #[arg(long, default_value = "1,3,10,16")]
    d_grid: String,

    /// Training sizes, comma separated.
    #[arg(long, default_value = "100,200,400,800")]
    n_grid: String,

    /// Number of sin/cos feature pairs.
    #[arg(long, default_value_t = 1000)]
    m: usize,

    /// Weight variance convention: inv-sqrt-d or inv-d.
    #[arg(long, default_value = "inv-sqrt-d")]
    variance: String,

    /// Penalty selection: loo or kfold:<k>.
    #[arg(long, default_value = "loo")]
    cv: String,

    #[arg(long, default_value = "1e-4:1e2:7")]
    lambda_grid: String,

    /// Size of the held-out test set.
    #[arg(long, default_value_t = 10_000)]
    n_test: usize,
}

#[derive(Args, Debug)]
pub struct CorruptionArgs {
    /// Input dimension.
    #[arg(long, default_value_t = 16)]
    l: usize,

    /// Number of samples.
    #[arg(long, default_value_t = 800)]
    n: usize,

    /// Corruption mode: per-coordinate or per-sample.
    #[arg(long, default_value = "per-coordinate")]
    mode: String,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[command(flatten)]
    common: CorruptionArgs,

    /// Corruption probability.
    #[arg(long, default_value_t = 0.03)]
    p: f64,

    /// Standard deviation of the replacement noise.
    #[arg(long, default_value_t = 6.0)]
    noise_sigma: f64,

    /// Fraction of samples used for training.
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,

    /// Corrupt the held-out inputs as well.
    #[arg(long)]
    corrupt_test: bool,

    #[arg(long, default_value = "1e-4:1e2:7")]
    lambda_grid: String,
}

#[derive(Args, Debug)]
pub struct EigenArgs {
    #[command(flatten)]
    common: CorruptionArgs,

    /// Corruption configs as p:sigma pairs, comma separated.
    #[arg(long, default_value = "0:6,0.03:2,0.03:6,0.03:10,0.2:6,0.5:6")]
    configs: String,
}

pub fn run(cmd: StudyCommand, seed: u64, out_dir: &Path) -> anyhow::Result<()> {
    let out = match cmd {
        StudyCommand::Convergence(a) => run_convergence(&a, seed)?,
        StudyCommand::Polytest(a) => run_polytest(&a, seed)?,
        StudyCommand::Stability(a) => run_stability(&a, seed)?,
        StudyCommand::Eigen(a) => run_eigen(&a, seed)?,
    };
    let (csv, meta) = out.write_to(out_dir)?;
    eprintln!("wrote {} and {}", csv.display(), meta.display());
    Ok(())
}

fn run_convergence(a: &ConvergenceArgs, seed: u64) -> anyhow::Result<StudyOutput> {
    let nl = args::nonlinearity(&a.nonlinearity)?;
    let cfg = ConvergenceConfig {
        l: a.l,
        nonlinearity: nl,
        degrees: args::degree_spec(&a.degree, a.l)?,
        law: args::weight_law(&a.features, nl)?,
        m_grid: args::usize_list(&a.m_grid, "m grid")?,
        n_probe_pairs: a.probes,
        seed,
    };
    Ok(convergence::render(&cfg, &convergence_study(&cfg)?)?)
}

fn run_polytest(a: &PolytestArgs, seed: u64) -> anyhow::Result<StudyOutput> {
    let cfg = PolytestConfig {
        l: a.l,
        d_grid: args::usize_list(&a.d_grid, "d grid")?,
        n_grid: args::usize_list(&a.n_grid, "n grid")?,
        m: a.m,
        variance: a.variance.parse::<WeightVariance>()?,
        cv: a.cv.parse::<CvScheme>()?,
        lambda_grid: args::lambda_grid(&a.lambda_grid)?,
        n_test: a.n_test,
        ..PolytestConfig::new(seed)
    };
    Ok(polytest::render(&cfg, &polytest_study(&cfg)?)?)
}

fn run_stability(a: &StabilityArgs, seed: u64) -> anyhow::Result<StudyOutput> {
    let mode: CorruptionMode = a.common.mode.parse()?;
    let cfg = StabilityConfig {
        n: a.common.n,
        l: a.common.l,
        corruption: CorruptionSpec::new(a.p, a.noise_sigma, mode)?,
        train_fraction: a.train_fraction,
        corrupt_test: a.corrupt_test,
        lambda_grid: args::lambda_grid(&a.lambda_grid)?,
        ..StabilityConfig::new(seed)
    };
    Ok(corruption::render_stability(&cfg, &stability_study(&cfg)?)?)
}

fn run_eigen(a: &EigenArgs, seed: u64) -> anyhow::Result<StudyOutput> {
    let mode: CorruptionMode = a.common.mode.parse()?;
    let grid = a
        .configs
        .split(',')
        .map(|pair| {
            let (p, s) = pair
                .split_once(':')
                .ok_or_else(|| invalid(format!("corruption config `{pair}` must be p:sigma")))?;
            let p = args::list(p, "corruption probability")?[0];
            let s = args::list(s, "noise sigma")?[0];
            Ok(CorruptionSpec::new(p, s, mode)?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let cfg = EigenConfig {
        n: a.common.n,
        l: a.common.l,
        grid,
        ..EigenConfig::new(seed)
    };
    Ok(corruption::render_eigen(&cfg, &eigen_study(&cfg)?)?)
}
