//! Sparse random feature maps.
//!
//! A feature `i` connects to a neighborhood `N_i` of `d_i` input coordinates
//! and computes `scale * h(sum_{k in N_i} w_ik x_k + b_i)`. Sampling happens
//! in two steps: first the degree `d_i` from a [`DegreeSpec`], then a uniform
//! `d_i`-subset of the inputs, then the nonzero weights and the bias.
//!
//! The pre-activation is always `w.x + b`. Bias laws are symmetric intervals
//! in every shipped configuration, so this is distributionally the same as
//! the `w.x - b` convention.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::rng::{self, StreamRng};

/// JSON schema version written by [`SparseFeatureMap`] serialization.
pub const FEATURE_MAP_VERSION: u32 = 1;

const PMF_TOLERANCE: f64 = 1e-12;

/// Law of the in-degree of a feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeLaw {
    Regular { d: usize },
    Binomial { p: f64 },
    /// Probabilities of degrees `0..=l`.
    Custom { pmf: Vec<f64> },
}

/// A degree distribution over `0..=l` for inputs of dimension `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeSpec {
    pub l: usize,
    pub law: DegreeLaw,
}

impl DegreeSpec {
    pub fn regular(l: usize, d: usize) -> Result<Self> {
        Self::new(l, DegreeLaw::Regular { d })
    }

    pub fn binomial(l: usize, p: f64) -> Result<Self> {
        Self::new(l, DegreeLaw::Binomial { p })
    }

    pub fn custom(l: usize, pmf: Vec<f64>) -> Result<Self> {
        Self::new(l, DegreeLaw::Custom { pmf })
    }

    /// Every feature sees every input.
    pub fn dense(l: usize) -> Result<Self> {
        Self::regular(l, l)
    }

    pub fn new(l: usize, law: DegreeLaw) -> Result<Self> {
        let spec = DegreeSpec { l, law };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::invalid("input dimension l must be positive"));
        }
        match &self.law {
            DegreeLaw::Regular { d } => {
                if *d < 1 || *d > self.l {
                    return Err(Error::invalid(format!(
                        "regular degree must satisfy 1 <= d <= l = {}, got {d}",
                        self.l
                    )));
                }
            }
            DegreeLaw::Binomial { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid(format!(
                        "binomial connection probability must lie in [0, 1], got {p}"
                    )));
                }
            }
            DegreeLaw::Custom { pmf } => validate_pmf(pmf, self.l)?,
        }
        Ok(())
    }

    /// Probability mass of each degree `0..=l`.
    pub fn pmf(&self) -> Vec<f64> {
        let l = self.l;
        match &self.law {
            DegreeLaw::Regular { d } => {
                let mut pmf = vec![0.0; l + 1];
                pmf[*d] = 1.0;
                pmf
            }
            DegreeLaw::Binomial { p } => binomial_pmf(l, *p),
            DegreeLaw::Custom { pmf } => pmf.clone(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.pmf()
            .iter()
            .enumerate()
            .map(|(d, p)| d as f64 * p)
            .sum()
    }

    /// Draw one degree.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.law {
            DegreeLaw::Regular { d } => *d,
            DegreeLaw::Binomial { p } => {
                let dist = Binomial::new(self.l as u64, *p).expect("validated binomial");
                dist.sample(rng) as usize
            }
            DegreeLaw::Custom { pmf } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (d, p) in pmf.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return d;
                    }
                }
                // u landed in the rounding gap at the top; take the last supported degree
                pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
            }
        }
    }

    /// Parse `regular:3`, `binomial:0.25` or `custom:0.1,0.2,...`.
    pub fn parse(s: &str, l: usize) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("degree spec `{s}` must look like kind:value")))?;
        match kind.trim() {
            "regular" => {
                let d = arg
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad regular degree `{arg}`")))?;
                Self::regular(l, d)
            }
            "binomial" => {
                let p = parse_f64(arg)?;
                Self::binomial(l, p)
            }
            "custom" => {
                let pmf = arg.split(',').map(parse_f64).collect::<Result<Vec<_>>>()?;
                Self::custom(l, pmf)
            }
            other => Err(Error::invalid(format!("unknown degree law `{other}`"))),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("`{s}` is not a number")))
}

pub(crate) fn validate_pmf(pmf: &[f64], l: usize) -> Result<()> {
    if pmf.len() != l + 1 {
        return Err(Error::invalid(format!(
            "degree pmf needs l + 1 = {} entries, got {}",
            l + 1,
            pmf.len()
        )));
    }
    if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("degree pmf entries must be finite and nonnegative"));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > PMF_TOLERANCE {
        return Err(Error::invalid(format!("degree pmf sums to {total}, not 1")));
    }
    Ok(())
}

/// Binomial(l, p) probabilities of `0..=l`, computed in log space.
pub fn binomial_pmf(l: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        let mut v = vec![0.0; l + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; l + 1];
        v[l] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (0..=l)
        .map(|d| (ln_choose(l, d) + d as f64 * lp + (l - d) as f64 * lq).exp())
        .collect()
}

pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

/// Exact binomial coefficient, saturating at `u128::MAX`.
pub fn choose(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Elementwise nonlinearity `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// Heaviside: 1 for z > 0, else 0.
    Step,
    /// -1, 0, +1 with sign(0) = 0.
    Sign,
    /// `sqrt(2) cos z`, normalized so that uniform phases give a unit-diagonal kernel.
    Cosine,
    /// Two outputs per feature, `(sin z, cos z)`.
    SinCosPair,
    Exponential,
    /// `max(z, 0)^p`, with p = 0 meaning the step function.
    ThresholdPoly { p: u32 },
}

impl Nonlinearity {
    /// Outputs emitted per feature.
    pub fn outputs(&self) -> usize {
        match self {
            Nonlinearity::SinCosPair => 2,
            _ => 1,
        }
    }

    /// Scalar value of `h(z)`. For [`Nonlinearity::SinCosPair`] this is the cosine half.
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Nonlinearity::Step => step(z),
            Nonlinearity::Sign => sign(z),
            Nonlinearity::Cosine => std::f64::consts::SQRT_2 * z.cos(),
            Nonlinearity::SinCosPair => z.cos(),
            Nonlinearity::Exponential => z.exp(),
            Nonlinearity::ThresholdPoly { p: 0 } => step(z),
            Nonlinearity::ThresholdPoly { p } => {
                if z > 0.0 {
                    z.powi(p as i32)
                } else {
                    0.0
                }
            }
        }
    }

    /// Write `h(z)` into `out` (`outputs()` values).
    #[inline]
    fn eval_into(&self, z: f64, out: &mut [f64]) {
        match self {
            Nonlinearity::SinCosPair => {
                let (s, c) = z.sin_cos();
                out[0] = s;
                out[1] = c;
            }
            other => out[0] = other.eval(z),
        }
    }

    /// True when `h` is Lipschitz continuous.
    pub fn is_lipschitz(&self) -> bool {
        matches!(
            self,
            Nonlinearity::Cosine | Nonlinearity::SinCosPair | Nonlinearity::ThresholdPoly { p: 1 }
        )
    }

    /// Sum over outputs of `h(b)^2`, i.e. the product a degree-0 feature contributes to the Gram.
    pub fn squared_norm_at(&self, b: f64) -> f64 {
        match self {
            Nonlinearity::SinCosPair => 1.0,
            other => other.eval(b).powi(2),
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Step => write!(f, "step"),
            Nonlinearity::Sign => write!(f, "sign"),
            Nonlinearity::Cosine => write!(f, "cosine"),
            Nonlinearity::SinCosPair => write!(f, "sincos"),
            Nonlinearity::Exponential => write!(f, "exp"),
            Nonlinearity::ThresholdPoly { p } => write!(f, "threshold_poly:{p}"),
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "step" | "heaviside" => Nonlinearity::Step,
            "sign" => Nonlinearity::Sign,
            "cos" | "cosine" => Nonlinearity::Cosine,
            "sincos" | "sin_cos" | "fourier" => Nonlinearity::SinCosPair,
            "exp" | "exponential" => Nonlinearity::Exponential,
            "relu" => Nonlinearity::ThresholdPoly { p: 1 },
            other => {
                let p = other
                    .strip_prefix("threshold_poly:")
                    .and_then(|p| p.parse::<u32>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown nonlinearity `{other}`")))?;
                Nonlinearity::ThresholdPoly { p }
            }
        })
    }
}

#[inline]
pub fn step(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[inline]
pub fn sign(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Distribution of the nonzero weights of a feature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightDist {
    /// i.i.d. N(0, sigma^2) regardless of degree.
    GaussianIso { sigma: f64 },
    /// i.i.d. N(0, sigma^2 / d) for a feature of degree d, so E|w|^2 = sigma^2.
    GaussianScaled { sigma: f64 },
    /// +/- scale with equal probability.
    Rademacher { scale: f64 },
}

impl WeightDist {
    /// Standard deviation of one nonzero weight of a degree-`d` feature.
    pub fn std_for_degree(&self, d: usize) -> f64 {
        match *self {
            WeightDist::GaussianIso { sigma } => sigma,
            WeightDist::GaussianScaled { sigma } => sigma / (d.max(1) as f64).sqrt(),
            WeightDist::Rademacher { scale } => scale,
        }
    }

    /// E|w| for a single weight of a degree-`d` feature.
    pub fn mean_abs_for_degree(&self, d: usize) -> f64 {
        match self {
            WeightDist::Rademacher { scale } => *scale,
            _ => self.std_for_degree(d) * (2.0 / std::f64::consts::PI).sqrt(),
        }
    }

    fn is_gaussian(&self) -> bool {
        !matches!(self, WeightDist::Rademacher { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasLaw {
    Uniform { a1: f64, a2: f64 },
    None,
}

impl BiasLaw {
    pub fn symmetric(a: f64) -> Self {
        BiasLaw::Uniform { a1: -a, a2: a }
    }

    /// Uniform on [-pi, pi].
    pub fn phase() -> Self {
        Self::symmetric(std::f64::consts::PI)
    }
}

/// Joint law of weights and bias.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightLaw {
    pub weights: WeightDist,
    pub bias: BiasLaw,
}

impl WeightLaw {
    pub fn new(weights: WeightDist, bias: BiasLaw) -> Result<Self> {
        let law = WeightLaw { weights, bias };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        let scale = match self.weights {
            WeightDist::GaussianIso { sigma } | WeightDist::GaussianScaled { sigma } => sigma,
            WeightDist::Rademacher { scale } => scale,
        };
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("weight scale must be positive, got {scale}")));
        }
        if let BiasLaw::Uniform { a1, a2 } = self.bias {
            if !(a1.is_finite() && a2.is_finite() && a1 < a2) {
                return Err(Error::invalid(format!(
                    "bias interval needs a1 < a2, got [{a1}, {a2}]"
                )));
            }
        }
        Ok(())
    }

    fn sample_weights<R: Rng + ?Sized>(&self, d: usize, rng: &mut R, out: &mut Vec<f64>) {
        match self.weights {
            WeightDist::Rademacher { scale } => {
                out.extend((0..d).map(|_| if rng.random::<bool>() { scale } else { -scale }))
            }
            w => {
                debug_assert!(w.is_gaussian());
                let normal = Normal::new(0.0, w.std_for_degree(d)).expect("validated std");
                out.extend((0..d).map(|_| normal.sample(rng)));
            }
        }
    }

    fn sample_bias<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.bias {
            BiasLaw::Uniform { a1, a2 } => Uniform::new(a1, a2).expect("validated interval").sample(rng),
            BiasLaw::None => 0.0,
        }
    }
}

/// Draw `m` degrees. Degree `i` comes from the same stream that [`build_feature_map`]
/// uses for feature `i`, so the two agree for equal seeds.
pub fn sample_degrees(spec: &DegreeSpec, m: usize, seed: u64) -> Result<Vec<usize>> {
    spec.validate()?;
    Ok((0..m)
        .into_par_iter()
        .map(|i| spec.sample(&mut rng::stream(seed, i as u64)))
        .collect())
}

/// A uniformly random `d`-subset of `0..l`, sorted ascending.
pub fn sample_neighborhood<R: Rng + ?Sized>(l: usize, d: usize, rng: &mut R) -> Result<Vec<usize>> {
    if d > l {
        return Err(Error::invalid(format!("degree {d} exceeds input dimension {l}")));
    }
    if d == l {
        return Ok((0..l).collect());
    }
    let mut idx = index::sample(rng, l, d).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// An immutable sampled feature map, stored row-per-feature in a CSR-like layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "FeatureMapDocument", try_from = "FeatureMapDocument")]
pub struct SparseFeatureMap {
    l: usize,
    m: usize,
    nonlinearity: Nonlinearity,
    scale: f64,
    seed: u64,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

struct SampledFeature {
    neighborhood: Vec<usize>,
    weights: Vec<f64>,
    bias: f64,
}

fn sample_feature(
    l: usize,
    degrees: &DegreeSpec,
    law: &WeightLaw,
    rng: &mut StreamRng,
) -> SampledFeature {
    let d = degrees.sample(rng);
    let neighborhood = sample_neighborhood(l, d, rng).expect("degree drawn within 0..=l");
    let mut weights = Vec::with_capacity(d);
    law.sample_weights(d, rng, &mut weights);
    let bias = law.sample_bias(rng);
    SampledFeature {
        neighborhood,
        weights,
        bias,
    }
}

/// Sample `m` sparse features on `l` inputs.
///
/// Feature `i` draws its degree, neighborhood, weights and bias, in that
/// order, from stream `(seed, i)`. The result does not depend on the
/// number of rayon workers.
pub fn build_feature_map(
    l: usize,
    m: usize,
    degrees: &DegreeSpec,
    law: &WeightLaw,
    nonlinearity: Nonlinearity,
    seed: u64,
) -> Result<SparseFeatureMap> {
    if m == 0 {
        return Err(Error::invalid("feature count m must be positive"));
    }
    ensure_dims(l, degrees.l)?;
    degrees.validate()?;
    law.validate()?;

    let sampled: Vec<SampledFeature> = (0..m)
        .into_par_iter()
        .map(|i| sample_feature(l, degrees, law, &mut rng::stream(seed, i as u64)))
        .collect();

    let nnz: usize = sampled.iter().map(|f| f.neighborhood.len()).sum();
    let mut offsets = Vec::with_capacity(m + 1);
    let mut indices = Vec::with_capacity(nnz);
    let mut weights = Vec::with_capacity(nnz);
    let mut biases = Vec::with_capacity(m);
    offsets.push(0);
    for f in sampled {
        indices.extend_from_slice(&f.neighborhood);
        weights.extend_from_slice(&f.weights);
        biases.push(f.bias);
        offsets.push(indices.len());
    }

    Ok(SparseFeatureMap {
        l,
        m,
        nonlinearity,
        scale: 1.0 / (m as f64).sqrt(),
        seed,
        offsets,
        indices,
        weights,
        biases,
    })
}

impl SparseFeatureMap {
    pub fn input_dim(&self) -> usize {
        self.l
    }

    pub fn num_features(&self) -> usize {
        self.m
    }

    /// Columns of the feature matrix: `m`, or `2m` for sin/cos pairs.
    pub fn output_dim(&self) -> usize {
        self.m * self.nonlinearity.outputs()
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.m).map(|i| self.degree(i)).collect()
    }

    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn bias(&self, i: usize) -> f64 {
        self.biases[i]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Total stored weights, `sum_i d_i`.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Output columns belonging to feature `i`.
    pub fn output_columns(&self, i: usize) -> std::ops::Range<usize> {
        let k = self.nonlinearity.outputs();
        i * k..(i + 1) * k
    }

    /// Feature vector of one input.
    pub fn apply_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dims(self.l, x.len())?;
        let k = self.nonlinearity.outputs();
        let mut out = vec![0.0; self.output_dim()];
        for (i, chunk) in out.chunks_mut(k).enumerate() {
            let z = self
                .neighborhood(i)
                .iter()
                .zip(self.weights(i))
                .map(|(&j, w)| w * x[j])
                .sum::<f64>()
                + self.biases[i];
            self.nonlinearity.eval_into(z, chunk);
            chunk.iter_mut().for_each(|v| *v *= self.scale);
        }
        Ok(out)
    }

    /// Feature matrix of the rows of `x` (n x l). Costs O(n * sum_i d_i).
    ///
    /// Sin/cos pairs occupy adjacent columns `2i, 2i + 1`.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        ensure_dims(self.l, x.ncols())?;
        let n = x.nrows();
        let k = self.nonlinearity.outputs();
        let mut out = DMatrix::<f64>::zeros(n, self.output_dim());
        if n == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(n * k)
            .enumerate()
            .for_each_init(
                || vec![0.0; n],
                |z, (i, cols)| {
                    z.iter_mut().for_each(|v| *v = self.biases[i]);
                    for (&j, &w) in self.neighborhood(i).iter().zip(self.weights(i)) {
                        for (zr, xr) in z.iter_mut().zip(x.column(j).iter()) {
                            *zr += w * xr;
                        }
                    }
                    let mut buf = [0.0; 2];
                    for (r, &zr) in z.iter().enumerate() {
                        self.nonlinearity.eval_into(zr, &mut buf[..k]);
                        for c in 0..k {
                            cols[c * n + r] = self.scale * buf[c];
                        }
                    }
                },
            );
        Ok(out)
    }

    /// Empirical Gram matrix `F F^T` of the rows of `x`.
    pub fn empirical_kernel(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let f = self.apply(x)?;
        let mut g = &f * f.transpose();
        // symmetrize bitwise so downstream symmetric checks are exact
        let n = g.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = g[(i, j)];
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The versioned on-disk form of a feature map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureMapDocument {
    pub version: u32,
    pub l: usize,
    pub m: usize,
    pub nonlinearity: Nonlinearity,
    pub scale: f64,
    pub seed: u64,
    pub degrees: Vec<usize>,
    pub neighborhoods: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl From<SparseFeatureMap> for FeatureMapDocument {
    fn from(map: SparseFeatureMap) -> Self {
        let m = map.m;
        FeatureMapDocument {
            version: FEATURE_MAP_VERSION,
            l: map.l,
            m,
            nonlinearity: map.nonlinearity,
            scale: map.scale,
            seed: map.seed,
            degrees: map.degrees(),
            neighborhoods: (0..m).map(|i| map.neighborhood(i).to_vec()).collect(),
            weights: (0..m).map(|i| map.weights(i).to_vec()).collect(),
            biases: map.biases,
        }
    }
}

impl TryFrom<FeatureMapDocument> for SparseFeatureMap {
    type Error = Error;

    fn try_from(doc: FeatureMapDocument) -> Result<Self> {
        if doc.version != FEATURE_MAP_VERSION {
            return Err(Error::invalid(format!(
                "unsupported feature map version {} (expected {FEATURE_MAP_VERSION})",
                doc.version
            )));
        }
        let m = doc.m;
        if doc.degrees.len() != m
            || doc.neighborhoods.len() != m
            || doc.weights.len() != m
            || doc.biases.len() != m
        {
            return Err(Error::invalid("feature map arrays must all have length m"));
        }
        if !(doc.scale.is_finite() && doc.scale > 0.0) {
            return Err(Error::invalid("feature map scale must be positive"));
        }
        let mut offsets = Vec::with_capacity(m + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        for i in 0..m {
            let nb = &doc.neighborhoods[i];
            if nb.len() != doc.degrees[i] || doc.weights[i].len() != nb.len() {
                return Err(Error::invalid(format!("feature {i}: degree, neighborhood and weights disagree")));
            }
            if nb.windows(2).any(|w| w[0] >= w[1]) || nb.iter().any(|&j| j >= doc.l) {
                return Err(Error::invalid(format!(
                    "feature {i}: neighborhood must be strictly increasing within [0, {})",
                    doc.l
                )));
            }
            indices.extend_from_slice(nb);
            weights.extend_from_slice(&doc.weights[i]);
            offsets.push(indices.len());
        }
        Ok(SparseFeatureMap {
            l: doc.l,
            m,
            nonlinearity: doc.nonlinearity,
            scale: doc.scale,
            seed: doc.seed,
            offsets,
            indices,
            weights,
            biases: doc.biases,
        })
    }
}
