//! Uniform convergence of empirical kernels to their limits.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CsvTable, StudyOutput};
use crate::error::{ensure_dims, Error, Result};
use crate::kernel_oracles::limiting_kernel;
use crate::rng;
use crate::sparse_features::{build_feature_map, BiasLaw, DegreeSpec, Nonlinearity, WeightDist, WeightLaw};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub l: usize,
    pub nonlinearity: Nonlinearity,
    pub degrees: DegreeSpec,
    pub law: WeightLaw,
    pub m_grid: Vec<usize>,
    pub n_probe_pairs: usize,
    pub seed: u64,
}

impl ConvergenceConfig {
    /// Dense cosine features against the unit-bandwidth RBF kernel.
    pub fn cosine_rbf(l: usize, seed: u64) -> Result<Self> {
        Ok(ConvergenceConfig {
            l,
            nonlinearity: Nonlinearity::Cosine,
            degrees: DegreeSpec::dense(l)?,
            law: WeightLaw::new(WeightDist::GaussianIso { sigma: 1.0 }, BiasLaw::phase())?,
            m_grid: vec![1 << 8, 1 << 10, 1 << 12, 1 << 14],
            n_probe_pairs: 200,
            seed,
        })
    }

    fn validate(&self) -> Result<()> {
        ensure_dims(self.l, self.degrees.l)?;
        if self.m_grid.is_empty() || self.m_grid.contains(&0) {
            return Err(Error::invalid("m grid must be nonempty with every m >= 1"));
        }
        if self.n_probe_pairs == 0 {
            return Err(Error::invalid("need at least one probe pair"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub sup_error: f64,
    pub mean_error: f64,
}

/// Probe pairs in `[-1, 1]^l`: half independent uniform pairs, a quarter
/// antipodal (`x' = -x`) and a quarter near-duplicates (`x' = x + U(-0.01, 0.01)`, clamped).
pub fn probe_pairs(l: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut r = rng::tagged_stream(seed, "probes", 0);
    let uniform = |r: &mut rng::StreamRng| -> Vec<f64> { (0..l).map(|_| r.random_range(-1.0..=1.0)).collect() };
    let n_uniform = count - count / 2;
    let n_antipodal = (count - n_uniform) / 2;
    let mut pairs = Vec::with_capacity(count);
    for k in 0..count {
        let x = uniform(&mut r);
        let y = if k < n_uniform {
            uniform(&mut r)
        } else if k < n_uniform + n_antipodal {
            x.iter().map(|v| -v).collect()
        } else {
            x.iter()
                .map(|v| (v + r.random_range(-0.01..=0.01)).clamp(-1.0, 1.0))
                .collect()
        };
        pairs.push((x, y));
    }
    pairs
}

/// Errors against the closed-form limit of the configured features.
pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let kernel = limiting_kernel(&cfg.degrees, &cfg.law, cfg.nonlinearity)?;
    convergence_study_with(cfg, &|x: &[f64], y: &[f64]| kernel.eval(x, y))
}

/// Errors against an arbitrary oracle, for limits without a closed form.
pub fn convergence_study_with(
    cfg: &ConvergenceConfig,
    oracle: &(dyn Fn(&[f64], &[f64]) -> Result<f64> + Sync),
) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let pairs = probe_pairs(cfg.l, cfg.n_probe_pairs, cfg.seed);
    let exact: Vec<f64> = pairs.iter().map(|(x, y)| oracle(x, y)).collect::<Result<_>>()?;
    let p = pairs.len();
    let stacked = DMatrix::from_fn(2 * p, cfg.l, |i, j| {
        let (x, y) = &pairs[i / 2];
        if i % 2 == 0 {
            x[j]
        } else {
            y[j]
        }
    });
    cfg.m_grid
        .par_iter()
        .enumerate()
        .map(|(cell, &m)| {
            let seed = rng::derive_seed(cfg.seed, "convergence", cell as u64);
            let map = build_feature_map(cfg.l, m, &cfg.degrees, &cfg.law, cfg.nonlinearity, seed)?;
            let f = map.apply(&stacked)?;
            let errors: Vec<f64> = (0..p)
                .map(|k| (f.row(2 * k).dot(&f.row(2 * k + 1)) - exact[k]).abs())
                .collect();
            Ok(ConvergenceRow {
                m,
                sup_error: errors.iter().copied().fold(0.0, f64::max),
                mean_error: errors.iter().sum::<f64>() / p as f64,
            })
        })
        .collect()
}

/// Least-squares slope of `ln err` against `ln m`.
pub fn loglog_slope(rows: &[ConvergenceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.m as f64).ln(), r.sup_error.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn render(cfg: &ConvergenceConfig, rows: &[ConvergenceRow]) -> Result<StudyOutput> {
    let mut t = CsvTable::new(&["m", "sup_error", "mean_error"]);
    for r in rows {
        t.row(&[&r.m, &r.sup_error, &r.mean_error]);
    }
    let summary = if rows.len() >= 2 {
        json!({ "loglog_slope": loglog_slope(rows) })
    } else {
        json!({})
    };
    StudyOutput::new("convergence", t.finish(), cfg, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_set_layout() {
        let pairs = probe_pairs(4, 200, 1);
        assert_eq!(pairs.len(), 200);
        assert!(pairs.iter().flat_map(|(x, y)| x.iter().chain(y)).all(|v| (-1.0..=1.0).contains(v)));
        for (x, y) in &pairs[100..150] {
            assert!(x.iter().zip(y).all(|(a, b)| *a == -*b));
        }
        for (x, y) in &pairs[150..] {
            assert!(x.iter().zip(y).all(|(a, b)| (a - b).abs() <= 0.01 + 1e-15));
        }
    }

    #[test]
    fn zero_features_rejected() {
        let mut cfg = ConvergenceConfig::cosine_rbf(4, 0).unwrap();
        cfg.m_grid = vec![0, 16];
        assert!(convergence_study(&cfg).is_err());
    }

    #[test]
    fn errors_are_nonnegative_and_shrink() {
        let mut cfg = ConvergenceConfig::cosine_rbf(4, 3).unwrap();
        cfg.m_grid = vec![64, 16384];
        let rows = convergence_study(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.sup_error >= r.mean_error && r.mean_error >= 0.0));
        assert!(rows[1].sup_error < rows[0].sup_error);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let rows: Vec<ConvergenceRow> = [100usize, 400, 1600]
            .iter()
            .map(|&m| ConvergenceRow {
                m,
                sup_error: 3.0 / (m as f64).sqrt(),
                mean_error: 0.0,
            })
            .collect();
        assert!((loglog_slope(&rows) + 0.5).abs() < 1e-12);
    }
}
