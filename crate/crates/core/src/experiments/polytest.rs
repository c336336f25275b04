//! Sample efficiency of sparse features on a mostly linear polynomial target.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CsvTable, StudyOutput};
use crate::error::{Error, Result};
use crate::regression::{log_space, mse, ridge_cv, ridge_loo_cv, CvReport, RidgeFit};
use crate::rng;
use crate::sparse_features::{build_feature_map, BiasLaw, DegreeSpec, Nonlinearity, WeightDist, WeightLaw};

/// Rows of the test set featurized at once.
const TEST_CHUNK: usize = 1000;

/// `f(x) = c1 a.x + c2 p(x)` on `[0, 1]^l`, where `p` is a sum of degree-3
/// monomials. `c1`, `c2` give the linear part weight `1 - alpha` and the
/// polynomial weight `alpha` after both are scaled to unit standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTarget {
    pub direction: Vec<f64>,
    /// `(variables, coefficient)` for each monomial; variables are distinct.
    pub monomials: Vec<(Vec<usize>, f64)>,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub noise_std: f64,
}

impl PolyTarget {
    pub const ALPHA: f64 = 0.05;
    pub const NOISE_STD: f64 = 0.05;
    pub const CALIBRATION_SIZE: usize = 100_000;

    /// Draw a target for dimension `l` (at least 3) and calibrate it on
    /// `calibration_size` uniform points.
    pub fn sample(l: usize, calibration_size: usize, seed: u64) -> Result<Self> {
        if l < 3 {
            return Err(Error::invalid(format!("degree-3 monomials need l >= 3, got {l}")));
        }
        if calibration_size < 2 {
            return Err(Error::invalid("calibration needs at least 2 points"));
        }
        let mut r = rng::tagged_stream(seed, "target", 0);
        let direction: Vec<f64> = (0..l).map(|_| r.sample(StandardNormal)).collect();
        let monomials = (0..3)
            .map(|_| {
                let mut vars = sample(&mut r, l, 3).into_vec();
                vars.sort_unstable();
                (vars, r.sample(StandardNormal))
            })
            .collect();
        let mut target = PolyTarget {
            direction,
            monomials,
            alpha: Self::ALPHA,
            c1: 1.0,
            c2: 1.0,
            noise_std: Self::NOISE_STD,
        };
        let calib = uniform_inputs(calibration_size, l, rng::derive_seed(seed, "calibration", 0));
        let lin: Vec<f64> = calib.iter().map(|x| target.linear(x)).collect();
        let poly: Vec<f64> = calib.iter().map(|x| target.polynomial(x)).collect();
        let norm = (target.alpha.powi(2) + (1.0 - target.alpha).powi(2)).sqrt();
        target.c1 = (1.0 - target.alpha) / norm / std_dev(&lin);
        target.c2 = target.alpha / norm / std_dev(&poly);
        Ok(target)
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn linear(&self, x: &[f64]) -> f64 {
        self.direction.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    pub fn polynomial(&self, x: &[f64]) -> f64 {
        self.monomials
            .iter()
            .map(|(vars, c)| c * vars.iter().map(|&j| x[j]).product::<f64>())
            .sum()
    }

    /// Noiseless target value.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.c1 * self.linear(x) + self.c2 * self.polynomial(x)
    }

    /// `n` uniform inputs with noisy targets.
    pub fn draw(&self, n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let l = self.dim();
        let rows = uniform_inputs(n, l, seed);
        let mut noise = rng::tagged_stream(seed, "noise", 0);
        let y = rows
            .iter()
            .map(|x| self.eval(x) + self.noise_std * noise.sample::<f64, _>(StandardNormal))
            .collect();
        (DMatrix::from_fn(n, l, |i, j| rows[i][j]), y)
    }
}

fn uniform_inputs(n: usize, l: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::tagged_stream(seed, "uniform", i as u64);
            (0..l).map(|_| r.random::<f64>()).collect()
        })
        .collect()
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// How the Gaussian weight variance depends on the degree `d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightVariance {
    /// Variance `d^{-1/2}`.
    #[default]
    InverseSqrtDegree,
    /// Variance `1 / d`.
    InverseDegree,
}

impl WeightVariance {
    pub fn std(self, d: usize) -> f64 {
        match self {
            WeightVariance::InverseSqrtDegree => (d as f64).powf(-0.25),
            WeightVariance::InverseDegree => (d as f64).powf(-0.5),
        }
    }
}

impl std::str::FromStr for WeightVariance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inv-sqrt-d" | "inverse_sqrt_degree" => Ok(WeightVariance::InverseSqrtDegree),
            "inv-d" | "inverse_degree" => Ok(WeightVariance::InverseDegree),
            other => Err(Error::invalid(format!("unknown weight variance `{other}`"))),
        }
    }
}

/// Penalty selection scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CvScheme {
    LeaveOneOut,
    KFold { k: usize },
}

impl CvScheme {
    fn min_samples(self) -> usize {
        match self {
            CvScheme::LeaveOneOut => 3,
            CvScheme::KFold { k } => k.max(2),
        }
    }

    pub fn fit(self, f: &DMatrix<f64>, y: &[f64], grid: &[f64], seed: u64) -> Result<(CvReport, RidgeFit)> {
        match self {
            CvScheme::LeaveOneOut => ridge_loo_cv(f, y, grid),
            CvScheme::KFold { k } => ridge_cv(f, y, grid, k, seed),
        }
    }
}

impl std::str::FromStr for CvScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "loo" {
            return Ok(CvScheme::LeaveOneOut);
        }
        s.strip_prefix("kfold:")
            .and_then(|k| k.parse().ok())
            .map(|k| CvScheme::KFold { k })
            .ok_or_else(|| Error::invalid(format!("unknown CV scheme `{s}` (expected loo or kfold:<k>)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytestConfig {
    pub l: usize,
    pub d_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    /// Number of sin/cos feature pairs.
    pub m: usize,
    pub variance: WeightVariance,
    pub cv: CvScheme,
    pub lambda_grid: Vec<f64>,
    pub n_test: usize,
    pub calibration_size: usize,
    pub seed: u64,
}

impl PolytestConfig {
    pub fn new(seed: u64) -> Self {
        PolytestConfig {
            l: 16,
            d_grid: vec![1, 3, 10, 16],
            n_grid: vec![100, 200, 400, 800],
            m: 1000,
            variance: WeightVariance::InverseSqrtDegree,
            cv: CvScheme::LeaveOneOut,
            lambda_grid: log_space(1e-4, 1e2, 7).expect("static grid"),
            n_test: 10_000,
            calibration_size: PolyTarget::CALIBRATION_SIZE,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d_grid.is_empty() || self.n_grid.is_empty() {
            return Err(Error::invalid("degree and sample-size grids must be nonempty"));
        }
        if let Some(&d) = self.d_grid.iter().find(|&&d| d == 0 || d > self.l) {
            return Err(Error::invalid(format!("degree {d} outside [1, {}]", self.l)));
        }
        let need = self.cv.min_samples();
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < need) {
            return Err(Error::invalid(format!("n = {n} is smaller than the {need} samples cross-validation needs")));
        }
        if self.m == 0 || self.n_test == 0 {
            return Err(Error::invalid("m and n_test must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytestRow {
    pub d: usize,
    pub n: usize,
    pub test_mse: f64,
    pub lambda: f64,
}

/// Test MSE of cross-validated ridge on sin/cos features of each regular degree.
///
/// One target and one noisy test set per seed. Training sets are shared
/// across degrees for a given `n`; each cell draws its own features.
pub fn polytest_study(cfg: &PolytestConfig) -> Result<Vec<PolytestRow>> {
    cfg.validate()?;
    let target = PolyTarget::sample(cfg.l, cfg.calibration_size, cfg.seed)?;
    let (x_test, y_test) = target.draw(cfg.n_test, rng::derive_seed(cfg.seed, "test", 0));
    let train: Vec<(DMatrix<f64>, Vec<f64>)> = cfg
        .n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| target.draw(n, rng::derive_seed(cfg.seed, "train", k as u64)))
        .collect();
    let cells: Vec<(usize, usize)> = (0..cfg.d_grid.len())
        .flat_map(|a| (0..cfg.n_grid.len()).map(move |b| (a, b)))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(cell, &(a, b))| {
            let d = cfg.d_grid[a];
            let law = WeightLaw::new(
                WeightDist::GaussianIso {
                    sigma: cfg.variance.std(d),
                },
                BiasLaw::phase(),
            )?;
            let map = build_feature_map(
                cfg.l,
                cfg.m,
                &DegreeSpec::regular(cfg.l, d)?,
                &law,
                Nonlinearity::SinCosPair,
                rng::derive_seed(cfg.seed, "features", cell as u64),
            )?;
            let (x, y) = &train[b];
            let (report, fit) = cfg.cv.fit(&map.apply(x)?, y, &cfg.lambda_grid, cfg.seed)?;
            let mut pred = Vec::with_capacity(cfg.n_test);
            for start in (0..cfg.n_test).step_by(TEST_CHUNK) {
                let rows = TEST_CHUNK.min(cfg.n_test - start);
                pred.extend(fit.predict(&map.apply(&x_test.rows(start, rows).into_owned())?)?);
            }
            Ok(PolytestRow {
                d,
                n: cfg.n_grid[b],
                test_mse: mse(&y_test, &pred)?,
                lambda: report.lambda,
            })
        })
        .collect()
}

pub fn render(cfg: &PolytestConfig, rows: &[PolytestRow]) -> Result<StudyOutput> {
    let mut t = CsvTable::new(&["d", "n", "test_mse", "lambda"]);
    for r in rows {
        t.row(&[&r.d, &r.n, &r.test_mse, &r.lambda]);
    }
    let best: Vec<serde_json::Value> = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let winner = rows
                .iter()
                .filter(|r| r.n == n)
                .min_by(|a, b| a.test_mse.total_cmp(&b.test_mse))
                .map(|r| r.d);
            json!({ "n": n, "best_d": winner })
        })
        .collect();
    StudyOutput::new("polytest", t.finish(), cfg, json!({ "best_degree_by_n": best }))
}
