//! Sparse input corruption: regression stability and Gram spectrum amplification.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CsvTable, StudyOutput};
use crate::data::train_test_split;
use crate::error::{Error, Result};
use crate::kernel_oracles::{cross_gram, gram_matrix, KernelSpec};
use crate::regression::{
    huber_fit, kernel_ridge_cv, linear_ols, log_space, r2_score, trimmed_linear, RidgeFit, DEFAULT_FOLDS,
    DEFAULT_HUBER_DELTA, DEFAULT_HUBER_ITERATIONS, DEFAULT_TRIM_Z,
};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    /// Each entry is replaced independently.
    #[default]
    PerCoordinate,
    /// Each row is replaced as a whole.
    PerSample,
}

impl std::str::FromStr for CorruptionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-coordinate" | "per_coordinate" | "coordinate" => Ok(CorruptionMode::PerCoordinate),
            "per-sample" | "per_sample" | "sample" => Ok(CorruptionMode::PerSample),
            other => Err(Error::invalid(format!("unknown corruption mode `{other}`"))),
        }
    }
}

/// Replace inputs with `N(0, sigma^2)` noise with probability `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub p: f64,
    pub sigma: f64,
    #[serde(default)]
    pub mode: CorruptionMode,
}

impl CorruptionSpec {
    pub fn new(p: f64, sigma: f64, mode: CorruptionMode) -> Result<Self> {
        let spec = CorruptionSpec { p, sigma, mode };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("corruption probability must lie in [0, 1], got {}", self.p)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("noise std must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Corrupted inputs plus the `(row, column)` entries that were replaced, in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Corruption {
    pub x: DMatrix<f64>,
    pub mask: Vec<(usize, usize)>,
}

/// Apply `spec` to `x`.
///
/// Row `i` draws from its own stream and always consumes the same numbers
/// whatever `p` and `sigma` are, so for a fixed seed the replaced set grows
/// with `p` and the noise values scale with `sigma`.
pub fn corrupt_inputs(x: &DMatrix<f64>, spec: &CorruptionSpec, seed: u64) -> Result<Corruption> {
    spec.validate()?;
    let (n, l) = x.shape();
    let rows: Vec<(Vec<f64>, Vec<usize>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::tagged_stream(seed, "corruption", i as u64);
            let mut row: Vec<f64> = x.row(i).iter().copied().collect();
            let mut hit = Vec::new();
            match spec.mode {
                CorruptionMode::PerCoordinate => {
                    for (j, v) in row.iter_mut().enumerate() {
                        let u: f64 = r.random();
                        let z: f64 = r.sample(StandardNormal);
                        if u < spec.p {
                            *v = spec.sigma * z;
                            hit.push(j);
                        }
                    }
                }
                CorruptionMode::PerSample => {
                    let u: f64 = r.random();
                    let noise: Vec<f64> = (0..l).map(|_| r.sample(StandardNormal)).collect();
                    if u < spec.p {
                        for (j, (v, z)) in row.iter_mut().zip(noise).enumerate() {
                            *v = spec.sigma * z;
                            hit.push(j);
                        }
                    }
                }
            }
            (row, hit)
        })
        .collect();
    let out = DMatrix::from_fn(n, l, |i, j| rows[i].0[j]);
    let mask = rows
        .iter()
        .enumerate()
        .flat_map(|(i, (_, hit))| hit.iter().map(move |&j| (i, j)))
        .collect();
    Ok(Corruption { x: out, mask })
}

fn gaussian_matrix(n: usize, l: usize, seed: u64, tag: &str) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::tagged_stream(seed, tag, i as u64);
            (0..l).map(|_| r.sample(StandardNormal)).collect()
        })
        .collect();
    DMatrix::from_fn(n, l, |i, j| rows[i][j])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub n: usize,
    pub l: usize,
    pub corruption: CorruptionSpec,
    pub train_fraction: f64,
    /// Also corrupt the held-out inputs; by default they stay clean.
    pub corrupt_test: bool,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl StabilityConfig {
    pub fn new(seed: u64) -> Self {
        StabilityConfig {
            n: 800,
            l: 16,
            corruption: CorruptionSpec {
                p: 0.03,
                sigma: 6.0,
                mode: CorruptionMode::PerCoordinate,
            },
            train_fraction: 0.75,
            corrupt_test: false,
            lambda_grid: log_space(1e-4, 1e2, 7).expect("static grid"),
            folds: DEFAULT_FOLDS,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        self.corruption.validate()?;
        if self.l == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if self.n < 2 * self.folds {
            return Err(Error::invalid(format!("n = {} is too small for {} folds", self.n, self.folds)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub model: String,
    pub train_r2: f64,
    pub test_r2: f64,
    /// Selected penalty for the kernel model; absent otherwise.
    pub lambda: Option<f64>,
}

/// Linear data `y = X beta` with sparse input corruption, scored by four readouts.
///
/// Inputs and coefficients are standard normal. Training inputs are corrupted;
/// held-out inputs are corrupted only when `corrupt_test` is set. The kernel
/// model is kernel ridge on `k(x, x') = 1 - |x - x'|_1 / l` with a cross-validated penalty.
pub fn stability_study(cfg: &StabilityConfig) -> Result<Vec<StabilityRow>> {
    cfg.validate()?;
    let (n, l) = (cfg.n, cfg.l);
    let x = gaussian_matrix(n, l, cfg.seed, "inputs");
    let mut br = rng::tagged_stream(cfg.seed, "coefficients", 0);
    let beta: Vec<f64> = (0..l).map(|_| br.sample(StandardNormal)).collect();
    let y: Vec<f64> = (0..n).map(|i| x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum()).collect();
    let corrupted = corrupt_inputs(&x, &cfg.corruption, rng::derive_seed(cfg.seed, "corrupt", 0))?.x;
    let (train, test) = train_test_split(n, cfg.train_fraction, cfg.seed)?;
    let rows_of = |m: &DMatrix<f64>, idx: &[usize]| DMatrix::from_fn(idx.len(), l, |i, j| m[(idx[i], j)]);
    let x_tr = rows_of(&corrupted, &train);
    let x_te = rows_of(if cfg.corrupt_test { &corrupted } else { &x }, &test);
    let y_tr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let y_te: Vec<f64> = test.iter().map(|&i| y[i]).collect();

    let linear_row = |name: &str, fit: &RidgeFit| -> Result<StabilityRow> {
        Ok(StabilityRow {
            model: name.to_string(),
            train_r2: r2_score(&y_tr, &fit.predict(&x_tr)?)?,
            test_r2: r2_score(&y_te, &fit.predict(&x_te)?)?,
            lambda: None,
        })
    };
    let mut rows = vec![linear_row("linear", &linear_ols(&x_tr, &y_tr)?)?];

    let kernel = KernelSpec::SparseSignD1 { c: 1.0 };
    let g = gram_matrix(&kernel, &x_tr)?;
    let (report, krr) = kernel_ridge_cv(&g, &y_tr, &cfg.lambda_grid, cfg.folds, cfg.seed)?;
    rows.push(StabilityRow {
        model: "kernel".into(),
        train_r2: r2_score(&y_tr, &krr.predict(&g)?)?,
        test_r2: r2_score(&y_te, &krr.predict(&cross_gram(&kernel, &x_te, &x_tr)?)?)?,
        lambda: Some(report.lambda),
    });

    rows.push(linear_row("trim_linear", &trimmed_linear(&x_tr, &y_tr, DEFAULT_TRIM_Z)?.fit)?);

    let huber = match huber_fit(&x_tr, &y_tr, DEFAULT_HUBER_DELTA, DEFAULT_HUBER_ITERATIONS) {
        Ok(fit) => fit,
        // keep the last iterate; the score is still informative
        Err(Error::NonConvergence {
            coefficients, intercept, ..
        }) => RidgeFit {
            lambda: 0.0,
            intercept,
            coefficients,
            diagnostics: crate::regression::Diagnostics {
                train_mse: f64::NAN,
                train_r2: f64::NAN,
            },
        },
        Err(e) => return Err(e),
    };
    rows.push(linear_row("huber", &huber)?);
    Ok(rows)
}

pub fn render_stability(cfg: &StabilityConfig, rows: &[StabilityRow]) -> Result<StudyOutput> {
    let mut t = CsvTable::new(&["model", "train_r2", "test_r2", "lambda"]);
    for r in rows {
        let lambda = r.lambda.map(|v| v.to_string()).unwrap_or_default();
        t.row(&[&r.model, &r.train_r2, &r.test_r2, &lambda]);
    }
    let summary: serde_json::Map<String, serde_json::Value> = rows
        .iter()
        .map(|r| (r.model.clone(), json!({ "train_r2": r.train_r2, "test_r2": r.test_r2 })))
        .collect();
    StudyOutput::new("stability", t.finish(), cfg, serde_json::Value::Object(summary))
}

/// Per-config spectrum ratio in dB, eigenvalues sorted by magnitude (largest first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplificationCurve {
    pub p: f64,
    pub sigma: f64,
    pub clean: Vec<f64>,
    pub corrupted: Vec<f64>,
    /// `10 log10(|corrupted_i| / |clean_i|)`; `+inf` where the clean eigenvalue is zero.
    pub db: Vec<f64>,
}

impl AmplificationCurve {
    /// Mean over finite entries.
    pub fn mean_db(&self) -> f64 {
        finite_mean(self.db.iter().copied())
    }

    /// Mean of `|dB|` over the `k` largest eigenvalues, finite entries only.
    pub fn top_mean_abs_db(&self, k: usize) -> f64 {
        finite_mean(self.db.iter().take(k).map(|v| v.abs()))
    }
}

fn finite_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn sorted_spectrum(g: DMatrix<f64>) -> Vec<f64> {
    let mut eig: Vec<f64> = SymmetricEigen::new(g).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    eig
}

/// `10 log10(|corrupted_i| / |clean_i|)` elementwise, `+inf` where the clean value is zero.
pub fn amplification_db(clean: &[f64], corrupted: &[f64]) -> Vec<f64> {
    clean
        .iter()
        .zip(corrupted)
        .map(|(c, e)| {
            if *c == 0.0 {
                f64::INFINITY
            } else {
                10.0 * (e.abs() / c.abs()).log10()
            }
        })
        .collect()
}

/// Gram spectrum amplification of each corruption config relative to clean `x`.
///
/// Every config uses the same corruption seed, so masks nest as `p` grows
/// and noise values scale with `sigma`.
pub fn eigen_amplification(
    x: &DMatrix<f64>,
    grid: &[CorruptionSpec],
    kernel: &KernelSpec,
    seed: u64,
) -> Result<Vec<AmplificationCurve>> {
    kernel.validate()?;
    for spec in grid {
        spec.validate()?;
    }
    let clean = sorted_spectrum(gram_matrix(kernel, x)?);
    let corruption_seed = rng::derive_seed(seed, "corrupt", 0);
    grid.par_iter()
        .map(|spec| {
            let noisy = corrupt_inputs(x, spec, corruption_seed)?.x;
            let corrupted = sorted_spectrum(gram_matrix(kernel, &noisy)?);
            let db = amplification_db(&clean, &corrupted);
            Ok(AmplificationCurve {
                p: spec.p,
                sigma: spec.sigma,
                clean: clean.clone(),
                corrupted,
                db,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub n: usize,
    pub l: usize,
    pub kernel: KernelSpec,
    pub grid: Vec<CorruptionSpec>,
    pub seed: u64,
}

impl EigenConfig {
    /// Clean control, a sweep over `sigma` at `p = 0.03` and a sweep over `p` at `sigma = 6`.
    pub fn new(seed: u64) -> Self {
        let spec = |p, sigma| CorruptionSpec {
            p,
            sigma,
            mode: CorruptionMode::PerCoordinate,
        };
        EigenConfig {
            n: 800,
            l: 16,
            kernel: KernelSpec::SparseSignD1 { c: 1.0 },
            grid: vec![
                spec(0.0, 6.0),
                spec(0.03, 2.0),
                spec(0.03, 6.0),
                spec(0.03, 10.0),
                spec(0.2, 6.0),
                spec(0.5, 6.0),
            ],
            seed,
        }
    }
}

/// Standard normal inputs of shape `n x l`, then [`eigen_amplification`].
pub fn eigen_study(cfg: &EigenConfig) -> Result<Vec<AmplificationCurve>> {
    if cfg.n == 0 || cfg.l == 0 {
        return Err(Error::invalid("eigen study needs n >= 1 and l >= 1"));
    }
    let x = gaussian_matrix(cfg.n, cfg.l, cfg.seed, "inputs");
    eigen_amplification(&x, &cfg.grid, &cfg.kernel, cfg.seed)
}

pub fn render_eigen(cfg: &EigenConfig, curves: &[AmplificationCurve]) -> Result<StudyOutput> {
    let mut t = CsvTable::new(&["p", "sigma", "rank", "clean_eigenvalue", "corrupted_eigenvalue", "amplification_db"]);
    for c in curves {
        for (rank, ((a, b), db)) in c.clean.iter().zip(&c.corrupted).zip(&c.db).enumerate() {
            t.row(&[&c.p, &c.sigma, &rank, a, b, db]);
        }
    }
    let summary: Vec<serde_json::Value> = curves
        .iter()
        .map(|c| {
            json!({
                "p": c.p,
                "sigma": c.sigma,
                "mean_db": finite_or_null(c.mean_db()),
                "top10_mean_abs_db": finite_or_null(c.top_mean_abs_db(10)),
                "excluded": c.db.iter().filter(|v| !v.is_finite()).count(),
            })
        })
        .collect();
    StudyOutput::new("eigen", t.finish(), cfg, json!(summary))
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}
