//! Exact limiting kernels of random feature maps.
//!
//! Dense kernels (RBF, arc-cosine of order 0, sign, moment generating
//! function) plus their sparse counterparts: the regular-degree additive
//! kernel, which averages a base kernel over all `d`-subsets of coordinates,
//! and mixtures of those over a degree distribution. The two `d = 1` closed
//! forms (step and sign nonlinearities) are provided directly.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::sparse_features::{
    choose, sign, validate_pmf, BiasLaw, DegreeLaw, DegreeSpec, Nonlinearity, WeightDist, WeightLaw,
};

/// Largest number of neighborhoods enumerated by [`regular_additive_kernel`].
pub const MAX_NEIGHBORHOODS: u128 = 1_000_000;

/// An exactly computable kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-|x - x'|^2 / (2 sigma^2))`.
    Rbf { sigma: f64 },
    /// Arc-cosine kernel of order 0, `1 - theta / pi`.
    ArcCos0,
    /// Sign features with `w ~ N(0, sigma^2 / l I)` and `b ~ U[a1, a2]`.
    DenseSign { sigma: f64, a1: f64, a2: f64 },
    /// Exponential features with `w ~ N(mean, covariance)` and a caller-supplied `E exp(2b)`.
    MgfGaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        bias_constant: f64,
    },
    /// Degree-1 step features: one minus the normalized sign-disagreement count.
    SparseStepD1,
    /// Degree-1 sign features ("random stumps"): `1 - (c / l) |x - x'|_1`.
    SparseSignD1 { c: f64 },
    /// Average of `base` over all `d`-subsets of the coordinates.
    RegularAdditive { d: usize, base: Box<KernelSpec> },
    /// `pmf[0] * degree_zero + sum_{d >= 1} pmf[d] * k_d^reg` with base `bases[d - 1]`.
    ///
    /// `bases[d - 1]` may be `None` only where `pmf[d] == 0`.
    DegreeMixture {
        pmf: Vec<f64>,
        degree_zero: f64,
        bases: Vec<Option<KernelSpec>>,
    },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Rbf { sigma } => positive("rbf sigma", *sigma),
            KernelSpec::ArcCos0 | KernelSpec::SparseStepD1 => Ok(()),
            KernelSpec::DenseSign { sigma, a1, a2 } => {
                positive("sign sigma", *sigma)?;
                interval(*a1, *a2)
            }
            KernelSpec::MgfGaussian {
                mean,
                covariance,
                bias_constant,
            } => validate_mgf(mean, covariance, *bias_constant),
            KernelSpec::SparseSignD1 { c } => positive("stump constant c", *c),
            KernelSpec::RegularAdditive { d, base } => {
                if *d == 0 {
                    return Err(Error::invalid("additive degree must be at least 1"));
                }
                base.validate()
            }
            KernelSpec::DegreeMixture {
                pmf,
                degree_zero,
                bases,
            } => {
                if pmf.is_empty() {
                    return Err(Error::invalid("degree pmf is empty"));
                }
                validate_pmf(pmf, pmf.len() - 1)?;
                if bases.len() + 1 != pmf.len() {
                    return Err(Error::invalid(format!(
                        "mixture needs one base per degree 1..={}, got {}",
                        pmf.len() - 1,
                        bases.len()
                    )));
                }
                if !degree_zero.is_finite() {
                    return Err(Error::invalid("degree-zero term must be finite"));
                }
                for (d, base) in bases.iter().enumerate() {
                    match base {
                        Some(b) => b.validate()?,
                        None if pmf[d + 1] > 0.0 => {
                            return Err(Error::invalid(format!(
                                "degree {} has mass {} but no base kernel",
                                d + 1,
                                pmf[d + 1]
                            )))
                        }
                        None => {}
                    }
                }
                Ok(())
            }
        }
    }

    /// Evaluate `k(x, x')`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        ensure_dims(x.len(), y.len())?;
        match self {
            KernelSpec::Rbf { sigma } => rbf_kernel(x, y, *sigma),
            KernelSpec::ArcCos0 => arccos0_kernel(x, y),
            KernelSpec::DenseSign { sigma, a1, a2 } => dense_sign_kernel(x, y, *sigma, *a1, *a2, x.len()),
            KernelSpec::MgfGaussian {
                mean,
                covariance,
                bias_constant,
            } => mgf_gaussian_kernel(x, y, mean, covariance, *bias_constant),
            KernelSpec::SparseStepD1 => sparse_step_d1(x, y),
            KernelSpec::SparseSignD1 { c } => sparse_sign_d1(x, y, *c, x.len()),
            KernelSpec::RegularAdditive { d, base } => regular_additive_kernel(x, y, *d, base),
            KernelSpec::DegreeMixture {
                pmf,
                degree_zero,
                bases,
            } => degree_mixture_kernel(x, y, pmf, *degree_zero, bases),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: KernelSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

fn interval(a1: f64, a2: f64) -> Result<()> {
    if a1.is_finite() && a2.is_finite() && a1 < a2 {
        Ok(())
    } else {
        Err(Error::invalid(format!("bias interval needs a1 < a2, got [{a1}, {a2}]")))
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    ensure_dims(x.len(), y.len())?;
    positive("rbf sigma", sigma)?;
    Ok((-sq_dist(x, y) / (2.0 * sigma * sigma)).exp())
}

/// `1 - arccos(cos theta) / pi`; undefined for zero vectors.
pub fn arccos0_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    ensure_dims(x.len(), y.len())?;
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::invalid("arc-cosine kernel is undefined at the zero vector"));
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let cos = (dot / (nx * ny)).clamp(-1.0, 1.0);
    Ok(1.0 - cos.acos() / std::f64::consts::PI)
}

/// `1 - 2 sigma sqrt(2 / (pi l)) |x - x'|_2 / (a2 - a1)`.
pub fn dense_sign_kernel(x: &[f64], y: &[f64], sigma: f64, a1: f64, a2: f64, l: usize) -> Result<f64> {
    ensure_dims(x.len(), y.len())?;
    positive("sign sigma", sigma)?;
    interval(a1, a2)?;
    if l == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let dist = sq_dist(x, y).sqrt();
    Ok(1.0 - 2.0 * sigma * (2.0 / (std::f64::consts::PI * l as f64)).sqrt() * dist / (a2 - a1))
}

fn validate_mgf(mean: &[f64], covariance: &[Vec<f64>], bias_constant: f64) -> Result<()> {
    let l = mean.len();
    if covariance.len() != l || covariance.iter().any(|r| r.len() != l) {
        return Err(Error::invalid(format!("covariance must be {l} x {l}")));
    }
    if !(bias_constant.is_finite() && bias_constant > 0.0) {
        return Err(Error::invalid("bias constant E exp(2b) must be finite and positive"));
    }
    let cov = DMatrix::from_fn(l, l, |i, j| covariance[i][j]);
    let scale = cov.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if (&cov - cov.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid("covariance is not symmetric"));
    }
    if l > 0 {
        let min_eig = SymmetricEigen::new(cov).eigenvalues.min();
        if min_eig < -1e-10 * scale {
            return Err(Error::invalid(format!(
                "covariance is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
    }
    Ok(())
}

/// `exp(m.(x + x') + 1/2 (x + x')^T S (x + x')) * E exp(2b)` for `w ~ N(m, S)`.
pub fn mgf_gaussian_kernel(
    x: &[f64],
    y: &[f64],
    mean: &[f64],
    covariance: &[Vec<f64>],
    bias_constant: f64,
) -> Result<f64> {
    ensure_dims(x.len(), y.len())?;
    ensure_dims(mean.len(), x.len())?;
    validate_mgf(mean, covariance, bias_constant)?;
    let s: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let linear: f64 = mean.iter().zip(&s).map(|(m, v)| m * v).sum();
    let quad: f64 = covariance
        .iter()
        .zip(&s)
        .map(|(row, si)| si * row.iter().zip(&s).map(|(c, sj)| c * sj).sum::<f64>())
        .sum();
    Ok((linear + 0.5 * quad).exp() * bias_constant)
}

/// `1 - |{i : sgn x_i != sgn x'_i}| / l`, with sgn(0) = 0.
pub fn sparse_step_d1(x: &[f64], y: &[f64]) -> Result<f64> {
    ensure_dims(x.len(), y.len())?;
    if x.is_empty() {
        return Err(Error::invalid("dimension must be positive"));
    }
    let disagree = x.iter().zip(y).filter(|(a, b)| sign(**a) != sign(**b)).count();
    Ok(1.0 - disagree as f64 / x.len() as f64)
}

/// `1 - (c / l) |x - x'|_1`.
pub fn sparse_sign_d1(x: &[f64], y: &[f64], c: f64, l: usize) -> Result<f64> {
    ensure_dims(x.len(), y.len())?;
    positive("stump constant c", c)?;
    if l == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
    Ok(1.0 - c / l as f64 * l1)
}

/// The stump constant `c = 2 E|w| / (a2 - a1)`.
pub fn stump_constant(mean_abs_weight: f64, a1: f64, a2: f64) -> Result<f64> {
    interval(a1, a2)?;
    positive("E|w|", mean_abs_weight)?;
    Ok(2.0 * mean_abs_weight / (a2 - a1))
}

/// Visit every sorted `d`-subset of `0..l` in lexicographic order.
fn for_each_subset(l: usize, d: usize, mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        f(&idx)?;
        // rightmost position that can still advance
        let Some(i) = (0..d).rev().find(|&i| idx[i] < i + l - d) else {
            return Ok(());
        };
        idx[i] += 1;
        for j in (i + 1)..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Average of `base(x_N, x'_N)` over all `d`-subsets `N` of the coordinates.
pub fn regular_additive_kernel(x: &[f64], y: &[f64], d: usize, base: &KernelSpec) -> Result<f64> {
    ensure_dims(x.len(), y.len())?;
    let l = x.len();
    if d == 0 || d > l {
        return Err(Error::invalid(format!("additive degree must satisfy 1 <= d <= l = {l}, got {d}")));
    }
    let count = choose(l, d);
    if count > MAX_NEIGHBORHOODS {
        return Err(Error::TooManyNeighborhoods {
            l,
            d,
            count,
            limit: MAX_NEIGHBORHOODS,
        });
    }
    if d == l {
        return base.eval(x, y);
    }
    let mut xs = vec![0.0; d];
    let mut ys = vec![0.0; d];
    let mut total = 0.0;
    for_each_subset(l, d, |nb| {
        for (k, &j) in nb.iter().enumerate() {
            xs[k] = x[j];
            ys[k] = y[j];
        }
        total += base.eval(&xs, &ys)?;
        Ok(())
    })?;
    Ok(total / count as f64)
}

/// `sum_d D(d) k_d^reg(x, x')`, where the `d = 0` term is the constant `degree_zero`.
pub fn degree_mixture_kernel(
    x: &[f64],
    y: &[f64],
    pmf: &[f64],
    degree_zero: f64,
    bases: &[Option<KernelSpec>],
) -> Result<f64> {
    ensure_dims(x.len(), y.len())?;
    let l = x.len();
    validate_pmf(pmf, l)?;
    ensure_dims(l, bases.len())?;
    let mut total = pmf[0] * degree_zero;
    for d in 1..=l {
        if pmf[d] == 0.0 {
            continue;
        }
        let base = bases[d - 1]
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("degree {d} has positive mass but no base kernel")))?;
        total += pmf[d] * regular_additive_kernel(x, y, d, base)?;
    }
    Ok(total)
}

fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// Symmetric Gram matrix of the rows of `x`.
pub fn gram_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(x, i)).collect();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| spec.eval(&rows[i], &rows[j])).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut g = DMatrix::zeros(n, n);
    for (i, vals) in upper.into_iter().enumerate() {
        for (off, v) in vals.into_iter().enumerate() {
            g[(i, i + off)] = v;
            g[(i + off, i)] = v;
        }
    }
    Ok(g)
}

/// Cross-kernel matrix `K[i, j] = k(a_i, b_j)`.
pub fn cross_gram(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    ensure_dims(a.ncols(), b.ncols())?;
    let ra: Vec<Vec<f64>> = (0..a.nrows()).map(|i| row(a, i)).collect();
    let rb: Vec<Vec<f64>> = (0..b.nrows()).map(|i| row(b, i)).collect();
    let rows: Vec<Vec<f64>> = ra
        .par_iter()
        .map(|x| rb.iter().map(|y| spec.eval(x, y)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| rows[i][j]))
}

/// Export a Gram matrix as CSV: a header `n,<n>` followed by `n` comma-separated rows.
pub fn write_gram_csv<W: std::io::Write>(g: &DMatrix<f64>, mut out: W) -> Result<()> {
    writeln!(out, "n,{}", g.nrows())?;
    for i in 0..g.nrows() {
        let line: Vec<String> = (0..g.ncols()).map(|j| g[(i, j)].to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// The limiting kernel of features sampled with the given degree law, weight law and nonlinearity.
///
/// Known cases:
/// - cosine or sin/cos features with Gaussian weights: per-degree RBF with bandwidth `1 / std(w)`
///   (cosine needs a bias interval whose length is a multiple of pi);
/// - bias-free step features with Gaussian weights: per-degree arc-cosine of order 0;
/// - sign features with a uniform bias: the stump kernel at degree 1 (any weights), the dense
///   sign kernel at higher degrees (Gaussian weights). Exact only while `|w.x|` stays inside the
///   bias interval;
/// - exponential features with Gaussian weights: the Gaussian moment generating function.
pub fn limiting_kernel(
    degrees: &DegreeSpec,
    law: &WeightLaw,
    nonlinearity: Nonlinearity,
) -> Result<KernelSpec> {
    degrees.validate()?;
    law.validate()?;
    let l = degrees.l;
    let nl = match nonlinearity {
        Nonlinearity::ThresholdPoly { p: 0 } => Nonlinearity::Step,
        other => other,
    };
    let gaussian = !matches!(law.weights, WeightDist::Rademacher { .. });

    // the two d = 1 closed forms act on all l coordinates at once
    if let DegreeLaw::Regular { d: 1 } = degrees.law {
        match (nl, law.bias) {
            (Nonlinearity::Step, BiasLaw::None) if gaussian => return Ok(KernelSpec::SparseStepD1),
            (Nonlinearity::Sign, BiasLaw::Uniform { a1, a2 }) => {
                let c = stump_constant(law.weights.mean_abs_for_degree(1), a1, a2)?;
                return Ok(KernelSpec::SparseSignD1 { c });
            }
            _ => {}
        }
    }

    let degree_zero = degree_zero_term(nl, law)?;
    let pmf = degrees.pmf();
    let mut bases = Vec::with_capacity(l);
    for (d, &p) in pmf.iter().enumerate().skip(1) {
        bases.push(if p > 0.0 { Some(base_for_degree(d, nl, law)?) } else { None });
    }
    if let DegreeLaw::Regular { d } = degrees.law {
        let base = bases[d - 1].take().expect("regular degree has a base");
        return Ok(if d == l {
            base
        } else {
            KernelSpec::RegularAdditive { d, base: Box::new(base) }
        });
    }
    Ok(KernelSpec::DegreeMixture {
        pmf,
        degree_zero,
        bases,
    })
}

fn phase_covering(bias: BiasLaw) -> bool {
    match bias {
        BiasLaw::Uniform { a1, a2 } => {
            let k = (a2 - a1) / std::f64::consts::PI;
            (k - k.round()).abs() < 1e-9 && k.round() >= 1.0
        }
        BiasLaw::None => false,
    }
}

fn base_for_degree(d: usize, nl: Nonlinearity, law: &WeightLaw) -> Result<KernelSpec> {
    let gaussian = !matches!(law.weights, WeightDist::Rademacher { .. });
    let s = law.weights.std_for_degree(d);
    match nl {
        Nonlinearity::SinCosPair if gaussian => Ok(KernelSpec::Rbf { sigma: 1.0 / s }),
        Nonlinearity::Cosine if gaussian && phase_covering(law.bias) => Ok(KernelSpec::Rbf { sigma: 1.0 / s }),
        Nonlinearity::Step if gaussian && law.bias == BiasLaw::None => Ok(if d == 1 {
            KernelSpec::SparseStepD1
        } else {
            KernelSpec::ArcCos0
        }),
        Nonlinearity::Sign => match law.bias {
            BiasLaw::Uniform { a1, a2 } if d == 1 => Ok(KernelSpec::SparseSignD1 {
                c: stump_constant(law.weights.mean_abs_for_degree(1), a1, a2)?,
            }),
            BiasLaw::Uniform { a1, a2 } if gaussian => Ok(KernelSpec::DenseSign {
                sigma: s * (d as f64).sqrt(),
                a1,
                a2,
            }),
            _ => Err(Error::NoOracle(format!("sign features with {:?} at degree {d}", law))),
        },
        Nonlinearity::Exponential if gaussian => Ok(KernelSpec::MgfGaussian {
            mean: vec![0.0; d],
            covariance: (0..d)
                .map(|i| (0..d).map(|j| if i == j { s * s } else { 0.0 }).collect())
                .collect(),
            bias_constant: exp2b(law.bias),
        }),
        other => Err(Error::NoOracle(format!("{other} features with {:?}", law))),
    }
}

/// `E exp(2b)` under the bias law.
fn exp2b(bias: BiasLaw) -> f64 {
    match bias {
        BiasLaw::Uniform { a1, a2 } => ((2.0 * a2).exp() - (2.0 * a1).exp()) / (2.0 * (a2 - a1)),
        BiasLaw::None => 1.0,
    }
}

/// `E[h(b)^2]`, the kernel of a feature with no inputs.
fn degree_zero_term(nl: Nonlinearity, law: &WeightLaw) -> Result<f64> {
    Ok(match (nl, law.bias) {
        (Nonlinearity::SinCosPair, _) => 1.0,
        (Nonlinearity::Cosine, b) if phase_covering(b) => 1.0,
        (Nonlinearity::Step, BiasLaw::Uniform { a1, a2 }) => ((a2.max(0.0) - a1.max(0.0)) / (a2 - a1)).max(0.0),
        (Nonlinearity::Sign, BiasLaw::Uniform { .. }) => 1.0,
        (Nonlinearity::Exponential, b) => exp2b(b),
        (nl, BiasLaw::None) => nl.squared_norm_at(0.0),
        (nl, b) => return Err(Error::NoOracle(format!("degree-0 term of {nl} with bias {b:?}"))),
    })
}
