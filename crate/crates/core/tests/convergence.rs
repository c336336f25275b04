use sparsekern::experiments::convergence::{self, convergence_study, convergence_study_with, ConvergenceConfig};
use sparsekern::{BiasLaw, DegreeSpec, Nonlinearity, WeightDist, WeightLaw};

/// `E[relu(w.x) relu(w.y)]` for `w ~ N(0, sigma^2 I)` by quadrature.
///
/// Rotating into the plane of `x` and `y`, `(w.x, w.y)` is a linear image of a
/// standard 2D Gaussian. In polar coordinates the radial integral of
/// `r^3 exp(-r^2 / 2) / (2 pi)` is `1 / pi`, which leaves one angular integral
/// evaluated with a fine midpoint rule.
fn relu_quadrature(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    let cos = (x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / (nx * ny)).clamp(-1.0, 1.0);
    let theta = cos.acos();
    let steps = 200_000;
    let h = 2.0 * std::f64::consts::PI / steps as f64;
    let angular: f64 = (0..steps)
        .map(|k| {
            let phi = (k as f64 + 0.5) * h;
            phi.cos().max(0.0) * (phi - theta).cos().max(0.0)
        })
        .sum::<f64>()
        * h;
    sigma * sigma * nx * ny * angular / std::f64::consts::PI
}

#[test]
fn quadrature_oracle_sanity() {
    // aligned inputs: E[relu(u)^2] = sigma^2 |x|^2 / 2
    let x = [0.3, -0.4];
    assert!((relu_quadrature(&x, &x, 2.0) - 4.0 * 0.25 / 2.0).abs() < 1e-8);
    // opposite inputs never fire together
    assert!(relu_quadrature(&x, &[-0.3, 0.4], 1.0).abs() < 1e-8);
    // orthogonal inputs: (1 / pi) * integral over [0, pi/2] of cos(phi) sin(phi) = 1 / (2 pi)
    let v = relu_quadrature(&[1.0, 0.0], &[0.0, 1.0], 1.0);
    assert!((v - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-8);
}

fn relu_config(l: usize, seed: u64) -> ConvergenceConfig {
    ConvergenceConfig {
        l,
        nonlinearity: Nonlinearity::ThresholdPoly { p: 1 },
        degrees: DegreeSpec::dense(l).unwrap(),
        law: WeightLaw::new(WeightDist::GaussianIso { sigma: 1.0 }, BiasLaw::None).unwrap(),
        m_grid: vec![1 << 8, 1 << 10, 1 << 12, 1 << 14],
        n_probe_pairs: 200,
        seed,
    }
}

#[test]
fn relu_features_converge_at_monte_carlo_rate() {
    let cfg = relu_config(4, 11);
    let rows = convergence_study_with(&cfg, &|x: &[f64], y: &[f64]| Ok(relu_quadrature(x, y, 1.0))).unwrap();
    let slope = convergence::loglog_slope(&rows);
    assert!((slope + 0.5).abs() <= 0.15, "slope {slope}");
}

#[test]
fn relu_without_closed_form_is_reported() {
    let err = convergence_study(&relu_config(4, 0)).unwrap_err();
    assert!(matches!(err, sparsekern::Error::NoOracle(_)), "{err}");
}

#[test]
fn scaled_weights_need_no_more_features_than_isotropic() {
    let l = 8;
    let base = |weights| ConvergenceConfig {
        l,
        nonlinearity: Nonlinearity::SinCosPair,
        degrees: DegreeSpec::binomial(l, 0.4).unwrap(),
        law: WeightLaw::new(weights, BiasLaw::phase()).unwrap(),
        m_grid: vec![1 << 8, 1 << 10, 1 << 12, 1 << 14],
        n_probe_pairs: 200,
        seed: 5,
    };
    let iso = convergence_study(&base(WeightDist::GaussianIso { sigma: 1.0 })).unwrap();
    let scaled = convergence_study(&base(WeightDist::GaussianScaled { sigma: 1.0 })).unwrap();
    for (a, b) in iso.iter().zip(&scaled) {
        assert!(b.sup_error <= 2.0 * a.sup_error, "m = {}: {} vs {}", a.m, b.sup_error, a.sup_error);
    }
}

#[test]
fn largest_m_beats_smallest_m_across_seeds() {
    let mut better = 0;
    for seed in 0..10 {
        let mut cfg = ConvergenceConfig::cosine_rbf(8, seed).unwrap();
        cfg.m_grid = vec![1 << 8, 1 << 14];
        let rows = convergence_study(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.sup_error >= 0.0));
        better += usize::from(rows[1].sup_error <= rows[0].sup_error);
    }
    assert!(better >= 9, "{better}/10");
}
