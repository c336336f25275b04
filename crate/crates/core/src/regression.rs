//! Linear readouts: ridge on feature matrices, kernel ridge on Gram
//! matrices, and the robust baselines (trimming, Huber) used in the
//! corruption study.
//!
//! Intercepts are fitted by centering and are never penalized.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::rng;

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_HUBER_DELTA: f64 = 1.35;
pub const DEFAULT_TRIM_Z: f64 = 3.0;
pub const DEFAULT_HUBER_ITERATIONS: usize = 1000;

const HUBER_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub train_mse: f64,
    pub train_r2: f64,
}

/// A fitted linear readout `f(x) = coefficients . phi(x) + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub lambda: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl RidgeFit {
    pub fn predict(&self, f: &DMatrix<f64>) -> Result<Vec<f64>> {
        ensure_dims(self.coefficients.len(), f.ncols())?;
        let alpha = DVector::from_column_slice(&self.coefficients);
        Ok((f * alpha).iter().map(|v| v + self.intercept).collect())
    }

    pub fn coefficient_norm(&self) -> f64 {
        self.coefficients.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    ensure_dims(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Err(Error::invalid("mse of an empty sample"));
    }
    Ok(y_true.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y_true.len() as f64)
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    ensure_dims(y_true.len(), y_pred.len())?;
    let (ss_res, ss_tot) = sums_of_squares(y_true, y_pred);
    if ss_tot == 0.0 {
        return Err(Error::invalid("R^2 is undefined for a constant target"));
    }
    Ok(1.0 - ss_res / ss_tot)
}

fn sums_of_squares(y_true: &[f64], y_pred: &[f64]) -> (f64, f64) {
    let mean = y_true.iter().sum::<f64>() / y_true.len().max(1) as f64;
    let ss_res = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum();
    let ss_tot = y_true.iter().map(|a| (a - mean).powi(2)).sum();
    (ss_res, ss_tot)
}

/// Training diagnostics; a constant target scores R^2 = 0, as the mean predictor would.
pub fn diagnostics(y_true: &[f64], y_pred: &[f64]) -> Diagnostics {
    let (ss_res, ss_tot) = sums_of_squares(y_true, y_pred);
    Diagnostics {
        train_mse: ss_res / y_true.len().max(1) as f64,
        train_r2: if ss_tot == 0.0 { 0.0 } else { 1.0 - ss_res / ss_tot },
    }
}

fn column_means(f: &DMatrix<f64>) -> DVector<f64> {
    let n = f.nrows().max(1) as f64;
    DVector::from_iterator(f.ncols(), f.column_iter().map(|c| c.sum() / n))
}

fn centered(f: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut fc = f.clone();
    for (mut col, mu) in fc.column_iter_mut().zip(means.iter()) {
        col.add_scalar_mut(-mu);
    }
    fc
}

fn check_inputs(f: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<()> {
    ensure_dims(f.nrows(), y.len())?;
    if y.is_empty() {
        return Err(Error::invalid("cannot fit on zero samples"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("penalty must be finite and nonnegative, got {lambda}")));
    }
    if f.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("inputs contain non-finite values"));
    }
    Ok(())
}

/// Solve a symmetric positive-definite system, reporting near-singularity.
fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let scale = a.diagonal().amax().max(f64::MIN_POSITIVE);
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))?;
    let l = chol.l_dirty();
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if min_pivot < 1e-13 * scale {
        return Err(Error::Singular(format!("{what} is numerically singular")));
    }
    Ok(chol.solve(b))
}

/// Ridge regression with an unpenalized intercept.
///
/// Solves `(Fc^T Fc + lambda I) alpha = Fc^T yc` on centered data. When
/// `F` has more columns than rows and `lambda > 0` the equivalent dual
/// system `(Fc Fc^T + lambda I) beta = yc`, `alpha = Fc^T beta` is used.
pub fn ridge_fit(f: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeFit> {
    fit_ridge(f, y, lambda, true)
}

/// Ridge regression without an intercept.
pub fn ridge_fit_through_origin(f: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeFit> {
    fit_ridge(f, y, lambda, false)
}

fn fit_ridge(f: &DMatrix<f64>, y: &[f64], lambda: f64, intercept: bool) -> Result<RidgeFit> {
    check_inputs(f, y, lambda)?;
    let (n, p) = f.shape();
    let means = if intercept {
        column_means(f)
    } else {
        DVector::zeros(p)
    };
    let y_mean = if intercept {
        y.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let fc = centered(f, &means);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let alpha = if p > n && lambda > 0.0 {
        let mut k = &fc * fc.transpose();
        for i in 0..n {
            k[(i, i)] += lambda;
        }
        let beta = spd_solve(k, &yc, "regularized Gram matrix")?;
        fc.transpose() * beta
    } else {
        let mut a = fc.transpose() * &fc;
        for i in 0..p {
            a[(i, i)] += lambda;
        }
        let rhs = fc.transpose() * &yc;
        spd_solve(a, &rhs, "normal equations").map_err(|e| match e {
            Error::Singular(msg) if lambda == 0.0 => {
                Error::Singular(format!("{msg}; use a positive ridge penalty"))
            }
            other => other,
        })?
    };

    let intercept_value = y_mean - means.dot(&alpha);
    let mut fit = RidgeFit {
        lambda,
        intercept: intercept_value,
        coefficients: alpha.iter().copied().collect(),
        diagnostics: Diagnostics {
            train_mse: 0.0,
            train_r2: 0.0,
        },
    };
    let pred = fit.predict(f)?;
    fit.diagnostics = diagnostics(y, &pred);
    Ok(fit)
}

/// `count` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) || count == 0 {
        return Err(Error::invalid("log grid needs positive finite bounds and count >= 1"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect())
}

/// Seeded partition of `0..n` into `k` folds of near-equal size.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} samples cannot fill {k} folds")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::tagged_stream(seed, "folds", 0));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = perm[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in fold {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

fn select_rows(f: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), f.ncols(), |i, j| f[(rows[i], j)])
}

fn select_block(g: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| g[(rows[i], cols[j])])
}

/// Validation predictions for every penalty from one eigendecomposition.
///
/// With `S = Q diag(s) Q^T`, predictions are `offset + P diag(1 / (s + lambda)) z`.
struct SpectralPath {
    offset: f64,
    eigenvalues: DVector<f64>,
    projected: DMatrix<f64>,
    rotated_target: DVector<f64>,
}

impl SpectralPath {
    fn new(
        system: DMatrix<f64>,
        cross: DMatrix<f64>,
        rhs: DVector<f64>,
        offset: f64,
    ) -> SpectralPath {
        let eig = SymmetricEigen::new(system);
        let eigenvalues = eig.eigenvalues.map(|v| v.max(0.0));
        SpectralPath {
            offset,
            projected: cross * &eig.eigenvectors,
            rotated_target: eig.eigenvectors.transpose() * rhs,
            eigenvalues,
        }
    }

    fn predict(&self, lambda: f64) -> Vec<f64> {
        let top = self.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let scaled = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().zip(self.rotated_target.iter()).map(|(s, z)| {
                let denom = s + lambda;
                // pseudo-inverse for an unpenalized rank-deficient system
                if denom <= 1e-12 * top {
                    0.0
                } else {
                    z / denom
                }
            }),
        );
        (&self.projected * scaled).iter().map(|v| v + self.offset).collect()
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("penalty grid is empty"));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::invalid("penalties must be finite and nonnegative"));
    }
    Ok(())
}

/// Pick the grid value with the lowest mean validation MSE; the first wins ties.
fn select_penalty(
    grid: &[f64],
    folds: &[Vec<usize>],
    y: &[f64],
    paths: &[SpectralPath],
) -> Result<(f64, Vec<f64>)> {
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut total = 0.0;
        for (fold, path) in folds.iter().zip(paths) {
            let truth: Vec<f64> = fold.iter().map(|&i| y[i]).collect();
            total += mse(&truth, &path.predict(lambda))?;
        }
        scores.push(total / folds.len() as f64);
    }
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if *s < scores[b] { i } else { b });
    Ok((grid[best], scores))
}

/// Outcome of a cross-validated penalty search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub lambda: f64,
    pub grid: Vec<f64>,
    pub mean_validation_mse: Vec<f64>,
}

/// Cross-validated ridge: choose `lambda` from `grid` on seeded folds, then refit on all data.
pub fn ridge_cv(
    f: &DMatrix<f64>,
    y: &[f64],
    grid: &[f64],
    k_folds: usize,
    seed: u64,
) -> Result<(CvReport, RidgeFit)> {
    check_inputs(f, y, 0.0)?;
    validate_grid(grid)?;
    let n = y.len();
    let folds = kfold_indices(n, k_folds, seed)?;
    let paths: Vec<SpectralPath> = folds
        .par_iter()
        .map(|val| {
            let train = complement(n, val);
            let f_tr = select_rows(f, &train);
            let f_val = select_rows(f, val);
            let y_tr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let means = column_means(&f_tr);
            let y_mean = y_tr.iter().sum::<f64>() / y_tr.len() as f64;
            let fc = centered(&f_tr, &means);
            let vc = centered(&f_val, &means);
            let yc = DVector::from_iterator(y_tr.len(), y_tr.iter().map(|v| v - y_mean));
            if train.len() <= f.ncols() {
                SpectralPath::new(&fc * fc.transpose(), &vc * fc.transpose(), yc, y_mean)
            } else {
                let rhs = fc.transpose() * yc;
                SpectralPath::new(fc.transpose() * &fc, vc, rhs, y_mean)
            }
        })
        .collect();
    let (lambda, scores) = select_penalty(grid, &folds, y, &paths)?;
    let fit = ridge_fit(f, y, lambda)?;
    Ok((
        CvReport {
            lambda,
            grid: grid.to_vec(),
            mean_validation_mse: scores,
        },
        fit,
    ))
}

/// Ridge with the penalty chosen by exact leave-one-out error.
///
/// With centered features `Fc = U diag(sqrt s) V^T`, the hat matrix is
/// `1/n + U diag(s / (s + lambda)) U^T` and the leave-one-out residual is
/// `r_i / (1 - H_ii)`, so every grid value costs one pass over `U`.
pub fn ridge_loo_cv(f: &DMatrix<f64>, y: &[f64], grid: &[f64]) -> Result<(CvReport, RidgeFit)> {
    check_inputs(f, y, 0.0)?;
    validate_grid(grid)?;
    let (n, p) = f.shape();
    if n < 3 {
        return Err(Error::invalid(format!("leave-one-out needs at least 3 samples, got {n}")));
    }
    let means = column_means(f);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let fc = centered(f, &means);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let (u, s) = if p >= n {
        let eig = SymmetricEigen::new(&fc * fc.transpose());
        (eig.eigenvectors, eig.eigenvalues)
    } else {
        let eig = SymmetricEigen::new(fc.transpose() * &fc);
        let mut u = &fc * &eig.eigenvectors;
        for (mut col, s) in u.column_iter_mut().zip(eig.eigenvalues.iter()) {
            let norm = s.max(0.0).sqrt();
            if norm > 0.0 {
                col /= norm;
            }
        }
        (u, eig.eigenvalues)
    };
    let top = s.amax().max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..s.len()).filter(|&k| s[k] > 1e-12 * top).collect();
    let z: Vec<f64> = keep.iter().map(|&k| u.column(k).dot(&yc)).collect();
    let scores: Vec<f64> = grid
        .iter()
        .map(|&lambda| {
            let shrink: Vec<f64> = keep.iter().map(|&k| s[k] / (s[k] + lambda)).collect();
            let total: f64 = (0..n)
                .map(|i| {
                    let (mut fitted, mut leverage) = (0.0, 1.0 / n as f64);
                    for (c, &k) in keep.iter().enumerate() {
                        let uik = u[(i, k)];
                        fitted += uik * shrink[c] * z[c];
                        leverage += uik * uik * shrink[c];
                    }
                    let r = (yc[i] - fitted) / (1.0 - leverage);
                    r * r
                })
                .sum();
            let score = total / n as f64;
            if score.is_nan() {
                f64::INFINITY
            } else {
                score
            }
        })
        .collect();
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if *s < scores[b] { i } else { b });
    let fit = ridge_fit(f, y, grid[best])?;
    Ok((
        CvReport {
            lambda: grid[best],
            grid: grid.to_vec(),
            mean_validation_mse: scores,
        },
        fit,
    ))
}

/// Ordinary least squares with intercept.
pub fn linear_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<RidgeFit> {
    ridge_fit(x, y, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrimmedFit {
    pub fit: RidgeFit,
    /// Rows kept for the fit.
    pub kept: Vec<usize>,
}

/// Drop every row with a coordinate more than `z_thresh` standard deviations
/// from its column mean, then fit OLS on the rest.
pub fn trimmed_linear(x: &DMatrix<f64>, y: &[f64], z_thresh: f64) -> Result<TrimmedFit> {
    check_inputs(x, y, 0.0)?;
    if !(z_thresh.is_finite() && z_thresh > 0.0) {
        return Err(Error::invalid(format!("trim threshold must be positive, got {z_thresh}")));
    }
    let n = x.nrows() as f64;
    let stats: Vec<(f64, f64)> = x
        .column_iter()
        .map(|c| {
            let mean = c.sum() / n;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect();
    let kept: Vec<usize> = (0..x.nrows())
        .filter(|&i| {
            stats.iter().enumerate().all(|(j, &(mean, sd))| {
                sd == 0.0 || ((x[(i, j)] - mean) / sd).abs() <= z_thresh
            })
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::invalid("every sample was trimmed"));
    }
    let xk = select_rows(x, &kept);
    let yk: Vec<f64> = kept.iter().map(|&i| y[i]).collect();
    Ok(TrimmedFit {
        fit: linear_ols(&xk, &yk)?,
        kept,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Weighted least squares with intercept.
fn weighted_ls(x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (n, p) = x.shape();
    let wsum: f64 = w.iter().sum();
    let means = DVector::from_iterator(
        p,
        (0..p).map(|j| (0..n).map(|i| w[i] * x[(i, j)]).sum::<f64>() / wsum),
    );
    let y_mean = (0..n).map(|i| w[i] * y[i]).sum::<f64>() / wsum;
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let xc = DMatrix::from_fn(n, p, |i, j| sw[i] * (x[(i, j)] - means[j]));
    let yc = DVector::from_iterator(n, (0..n).map(|i| sw[i] * (y[i] - y_mean)));
    let beta = spd_solve(xc.transpose() * &xc, &(xc.transpose() * yc), "weighted normal equations")?;
    let intercept = y_mean - means.dot(&beta);
    Ok((beta.iter().copied().collect(), intercept))
}

/// Huber regression by iteratively reweighted least squares.
///
/// Residuals are standardized by their median absolute deviation at every
/// step; `delta` is the transition point on that scale. Stops when no
/// coefficient (intercept included) moves by more than 1e-8.
pub fn huber_fit(x: &DMatrix<f64>, y: &[f64], delta: f64, iterations: usize) -> Result<RidgeFit> {
    check_inputs(x, y, 0.0)?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("Huber delta must be positive, got {delta}")));
    }
    let ols = linear_ols(x, y)?;
    let mut beta = ols.coefficients;
    let mut intercept = ols.intercept;
    let y_scale = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt().max(1.0);
    let mut last_change = f64::INFINITY;

    for _ in 0..iterations {
        let pred = predict_linear(x, &beta, intercept);
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let center = median(resid.clone());
        let mad = median(resid.iter().map(|r| (r - center).abs()).collect()) / 0.674_489_750_196_081_7;
        let scale = mad.max(1e-12 * y_scale);
        let weights: Vec<f64> = resid
            .iter()
            .map(|r| {
                let u = (r / scale).abs();
                if u <= delta {
                    1.0
                } else {
                    delta / u
                }
            })
            .collect();
        let (next_beta, next_intercept) = weighted_ls(x, y, &weights)?;
        last_change = next_beta
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold((next_intercept - intercept).abs(), f64::max);
        beta = next_beta;
        intercept = next_intercept;
        if last_change < HUBER_TOLERANCE {
            let pred = predict_linear(x, &beta, intercept);
            return Ok(RidgeFit {
                lambda: 0.0,
                intercept,
                coefficients: beta,
                diagnostics: diagnostics(y, &pred),
            });
        }
    }
    Err(Error::NonConvergence {
        iterations,
        last_change,
        coefficients: beta,
        intercept,
    })
}

fn predict_linear(x: &DMatrix<f64>, beta: &[f64], intercept: f64) -> Vec<f64> {
    (x * DVector::from_column_slice(beta))
        .iter()
        .map(|v| v + intercept)
        .collect()
}

fn check_symmetric(g: &DMatrix<f64>) -> Result<()> {
    if !g.is_square() {
        return Err(Error::invalid("Gram matrix must be square"));
    }
    let scale = g.amax().max(1.0);
    if (g - g.transpose()).amax() > 1e-10 * scale {
        return Err(Error::invalid("Gram matrix is not symmetric"));
    }
    Ok(())
}

/// Solve `(G + lambda I) beta = y`, falling back to LU when `G + lambda I` is indefinite.
fn regularized_solve(g: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let mut a = g.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(y));
    }
    a.lu()
        .solve(y)
        .ok_or_else(|| Error::Singular("G + lambda I is singular".into()))
}

/// Dual coefficients `beta = (G + lambda I)^{-1} y`; predict with `K(x, X) beta`.
pub fn kernel_ridge_fit(g: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_symmetric(g)?;
    ensure_dims(g.nrows(), y.len())?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("kernel ridge needs lambda > 0, got {lambda}")));
    }
    let beta = regularized_solve(g, &DVector::from_column_slice(y), lambda)?;
    Ok(beta.iter().copied().collect())
}

/// Kernel ridge regression with an unpenalized intercept.
///
/// Fits on the doubly centered Gram `H G H`, which makes predictions
/// coincide with [`ridge_fit`] on any features with `G = F F^T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRidge {
    pub lambda: f64,
    pub intercept: f64,
    pub dual: Vec<f64>,
    /// Column means of the training Gram matrix.
    gram_col_means: Vec<f64>,
    gram_mean: f64,
    pub diagnostics: Diagnostics,
}

fn double_center(g: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, f64) {
    let n = g.nrows();
    let col_means: Vec<f64> = g.column_iter().map(|c| c.sum() / n as f64).collect();
    let grand = col_means.iter().sum::<f64>() / n as f64;
    let gc = DMatrix::from_fn(n, n, |i, j| g[(i, j)] - col_means[i] - col_means[j] + grand);
    (gc, col_means, grand)
}

fn center_cross(k: &DMatrix<f64>, gram_col_means: &[f64], gram_mean: f64) -> DMatrix<f64> {
    let n_tr = k.ncols().max(1) as f64;
    let row_means: Vec<f64> = k.row_iter().map(|r| r.sum() / n_tr).collect();
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
        k[(i, j)] - row_means[i] - gram_col_means[j] + gram_mean
    })
}

impl KernelRidge {
    pub fn fit(g: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<Self> {
        check_symmetric(g)?;
        ensure_dims(g.nrows(), y.len())?;
        if y.is_empty() {
            return Err(Error::invalid("cannot fit on zero samples"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("kernel ridge needs lambda > 0, got {lambda}")));
        }
        let n = y.len();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let (gc, col_means, grand) = double_center(g);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let beta = regularized_solve(&gc, &yc, lambda)?;
        let pred: Vec<f64> = (&gc * &beta).iter().map(|v| v + y_mean).collect();
        Ok(KernelRidge {
            lambda,
            intercept: y_mean,
            dual: beta.iter().copied().collect(),
            gram_col_means: col_means,
            gram_mean: grand,
            diagnostics: diagnostics(y, &pred),
        })
    }

    /// Predict from the cross-kernel `K[i, j] = k(x_new_i, x_train_j)`.
    pub fn predict(&self, cross: &DMatrix<f64>) -> Result<Vec<f64>> {
        ensure_dims(self.dual.len(), cross.ncols())?;
        let kc = center_cross(cross, &self.gram_col_means, self.gram_mean);
        let beta = DVector::from_column_slice(&self.dual);
        Ok((kc * beta).iter().map(|v| v + self.intercept).collect())
    }
}

/// Cross-validated [`KernelRidge`] over a penalty grid.
pub fn kernel_ridge_cv(
    g: &DMatrix<f64>,
    y: &[f64],
    grid: &[f64],
    k_folds: usize,
    seed: u64,
) -> Result<(CvReport, KernelRidge)> {
    check_symmetric(g)?;
    ensure_dims(g.nrows(), y.len())?;
    validate_grid(grid)?;
    if grid.iter().any(|&l| l <= 0.0) {
        return Err(Error::invalid("kernel ridge penalties must be positive"));
    }
    let n = y.len();
    let folds = kfold_indices(n, k_folds, seed)?;
    let paths: Vec<SpectralPath> = folds
        .par_iter()
        .map(|val| {
            let train = complement(n, val);
            let g_tr = select_block(g, &train, &train);
            let g_val = select_block(g, val, &train);
            let y_tr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let y_mean = y_tr.iter().sum::<f64>() / y_tr.len() as f64;
            let (gc, col_means, grand) = double_center(&g_tr);
            let cross = center_cross(&g_val, &col_means, grand);
            let yc = DVector::from_iterator(y_tr.len(), y_tr.iter().map(|v| v - y_mean));
            SpectralPath::new(gc, cross, yc, y_mean)
        })
        .collect();
    let (lambda, scores) = select_penalty(grid, &folds, y, &paths)?;
    let model = KernelRidge::fit(g, y, lambda)?;
    Ok((
        CvReport {
            lambda,
            grid: grid.to_vec(),
            mean_validation_mse: scores,
        },
        model,
    ))
}
