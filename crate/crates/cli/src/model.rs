//! `fit` and `predict`.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use sparsekern::data::{read_table, select_inputs};
use sparsekern::experiments::CvScheme;
use sparsekern::regression::{ridge_fit, CvReport};
use sparsekern::{build_feature_map, Dataset, RidgeFit, SparseFeatureMap};

use crate::args::{self, invalid};
use crate::FeatureArgs;

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    data: PathBuf,

    /// Target column; defaults to the last column.
    #[arg(long)]
    target: Option<String>,

    /// Degree law: regular:<d>, binomial:<p>, custom:<p0>,<p1>,..., custom:<file.json> or dense.
    #[arg(long, default_value = "regular:1")]
    degree: String,

    /// Nonlinearity: step, sign, cosine, sincos, exp, relu or threshold_poly:<p>.
    #[arg(long, default_value = "cosine")]
    nonlinearity: String,

    /// Number of random features.
    #[arg(long, default_value_t = 1000)]
    m: usize,

    /// Penalty grid for cross-validation: lo:hi:count (log-spaced) or a comma list.
    #[arg(long, default_value = "1e-4:1e2:7", conflicts_with = "lambda")]
    lambda_grid: String,

    /// Fixed penalty; skips cross-validation.
    #[arg(long)]
    lambda: Option<f64>,

    /// Penalty selection: loo or kfold:<k>.
    #[arg(long, default_value = "kfold:5")]
    cv: String,

    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model written by `fit`.
    #[arg(long)]
    model: PathBuf,

    /// CSV holding at least the model's input columns.
    #[arg(long)]
    data: PathBuf,

    /// Write predictions here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Everything needed to predict: the sampled features, the readout and the input schema.
#[derive(Serialize, Deserialize)]
struct Model {
    feature_map: SparseFeatureMap,
    fit: RidgeFit,
    columns: Vec<String>,
    target: String,
}

pub fn fit(a: &FitArgs, seed: u64, out_dir: &Path) -> anyhow::Result<()> {
    let nl = args::nonlinearity(&a.nonlinearity)?;
    let law = args::weight_law(&a.features, nl)?;
    let cv: CvScheme = a.cv.parse()?;
    let grid = match a.lambda {
        Some(l) if !(l.is_finite() && l >= 0.0) => return Err(invalid(format!("--lambda must be nonnegative, got {l}"))),
        Some(_) => None,
        None => Some(args::lambda_grid(&a.lambda_grid)?),
    };
    if a.m == 0 {
        return Err(invalid("--m must be at least 1"));
    }
    let data = Dataset::from_csv_path(&a.data, a.target.as_deref())
        .with_context(|| format!("reading {}", a.data.display()))?;
    let degrees = args::degree_spec(&a.degree, data.dim())?;

    let map = build_feature_map(data.dim(), a.m, &degrees, &law, nl, seed)?;
    let features = map.apply(&data.x)?;
    let (fit, report): (RidgeFit, Option<CvReport>) = match (a.lambda, grid) {
        (Some(lambda), _) => (ridge_fit(&features, &data.y, lambda)?, None),
        (None, Some(grid)) => {
            let (report, fit) = cv.fit(&features, &data.y, &grid, seed)?;
            (fit, Some(report))
        }
        (None, None) => unreachable!("grid is parsed whenever no fixed penalty is given"),
    };

    std::fs::create_dir_all(out_dir)?;
    let metrics = json!({
        "n": data.len(),
        "input_dim": data.dim(),
        "features": a.m,
        "lambda": fit.lambda,
        "train_mse": fit.diagnostics.train_mse,
        "train_r2": fit.diagnostics.train_r2,
        "cv": report,
    });
    let model = Model {
        feature_map: map,
        fit,
        columns: data.columns.clone(),
        target: data.target.clone(),
    };
    let model_path = out_dir.join("model.json");
    std::fs::write(&model_path, serde_json::to_string(&model)? + "\n")?;
    std::fs::write(out_dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)? + "\n")?;
    eprintln!(
        "wrote {} (lambda {}, train R^2 {:.6})",
        model_path.display(),
        model.fit.lambda,
        model.fit.diagnostics.train_r2
    );
    Ok(())
}

pub fn predict(a: &PredictArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let model: Model = serde_json::from_str(&text).map_err(|e| invalid(format!("model {}: {e}", a.model.display())))?;
    if model.columns.len() != model.feature_map.input_dim() {
        return Err(invalid("model column list does not match its feature map"));
    }
    let file = std::fs::File::open(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let table = read_table(file)?;

    let mut out: Box<dyn Write> = match &a.output {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::BufWriter::new(std::io::stdout().lock())),
    };
    if table.header.is_empty() {
        out.flush()?;
        return Ok(());
    }
    let x = select_inputs(&table, &model.columns)?;
    writeln!(out, "prediction")?;
    if x.nrows() > 0 {
        for p in model.fit.predict(&model.feature_map.apply(&x)?)? {
            writeln!(out, "{p}")?;
        }
    }
    out.flush()?;
    Ok(())
}
