//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use sparsekern::experiments::convergence::{self, probe_pairs};
use sparsekern::experiments::corruption::{self, CorruptionMode, CorruptionSpec};
use sparsekern::experiments::polytest::{self, PolytestConfig};
use sparsekern::experiments::{
    convergence_study, eigen_study, polytest_study, stability_study, ConvergenceConfig, EigenConfig,
    StabilityConfig, StudyOutput,
};
use sparsekern::kernel_oracles::{
    limiting_kernel, regular_additive_kernel, sparse_sign_d1, sparse_step_d1, stump_constant, KernelSpec,
};
use sparsekern::regression::{ridge_fit, KernelRidge};
use sparsekern::rng;
use sparsekern::{build_feature_map, BiasLaw, DegreeSpec, Nonlinearity, WeightDist, WeightLaw};

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn uniform_pair(r: &mut rng::StreamRng, l: usize) -> (Vec<f64>, Vec<f64>) {
    let mut draw = || (0..l).map(|_| r.random_range(-1.0..=1.0)).collect::<Vec<f64>>();
    (draw(), draw())
}

fn closed_form_parity() -> Outcome {
    let start = Instant::now();
    let l = 8;
    let c = stump_constant((2.0 / std::f64::consts::PI).sqrt(), -3.0, 3.0).unwrap();
    let mut r = rng::tagged_stream(1, "acceptance", 1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (x, y) = uniform_pair(&mut r, l);
        let step = regular_additive_kernel(&x, &y, 1, &KernelSpec::ArcCos0).unwrap();
        let stump = regular_additive_kernel(&x, &y, 1, &KernelSpec::SparseSignD1 { c }).unwrap();
        worst = worst
            .max((step - sparse_step_d1(&x, &y).unwrap()).abs())
            .max((stump - sparse_sign_d1(&x, &y, c, l).unwrap()).abs());
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst <= 1e-12 && within(elapsed, 5),
        detail: format!("max abs diff {worst:.2e} over 10^4 pairs, {elapsed:.2?}"),
    }
}

fn monte_carlo_convergence() -> Outcome {
    let start = Instant::now();
    let cfg = ConvergenceConfig::cosine_rbf(8, 2).unwrap();
    let rows = convergence_study(&cfg).unwrap();
    let slope = convergence::loglog_slope(&rows);
    let sup = rows.last().unwrap().sup_error;
    let elapsed = start.elapsed();
    Outcome {
        pass: sup <= 0.05 && (slope + 0.5).abs() <= 0.15 && within(elapsed, 60),
        detail: format!("sup error {sup:.4} at m=16384, slope {slope:.3}, {elapsed:.2?}"),
    }
}

fn mixture_identity() -> Outcome {
    let start = Instant::now();
    let l = 6;
    let degrees = DegreeSpec::binomial(l, 0.4).unwrap();
    let law = WeightLaw::new(WeightDist::GaussianIso { sigma: 1.0 }, BiasLaw::phase()).unwrap();
    let kernel = limiting_kernel(&degrees, &law, Nonlinearity::Cosine).unwrap();
    let is_mixture = matches!(kernel, KernelSpec::DegreeMixture { .. });
    let map = build_feature_map(l, 100_000, &degrees, &law, Nonlinearity::Cosine, 3).unwrap();
    let pairs = probe_pairs(l, 50, 3);
    let mut worst = 0.0f64;
    for (x, y) in &pairs {
        let fx = map.apply_one(x).unwrap();
        let fy = map.apply_one(y).unwrap();
        let empirical: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
        worst = worst.max((empirical - kernel.eval(x, y).unwrap()).abs());
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: is_mixture && worst <= 0.02 && within(elapsed, 60),
        detail: format!("max deviation {worst:.4} on 50 pairs at m=10^5, {elapsed:.2?}"),
    }
}

fn degree_independent_scaling() -> Outcome {
    let l = 16;
    let sigma = 1.5;
    let law = WeightLaw::new(WeightDist::GaussianScaled { sigma }, BiasLaw::None).unwrap();
    let mut worst = 0.0f64;
    for d in 1..=l {
        let map = build_feature_map(l, 100_000, &DegreeSpec::regular(l, d).unwrap(), &law, Nonlinearity::Sign, d as u64)
            .unwrap();
        let energy = (0..map.num_features())
            .map(|i| map.weights(i).iter().map(|w| w * w).sum::<f64>())
            .sum::<f64>()
            / map.num_features() as f64;
        worst = worst.max((energy / (sigma * sigma) - 1.0).abs());
    }
    Outcome {
        pass: worst < 0.02,
        detail: format!("max relative deviation of mean |w|^2 from sigma^2 over d=1..16: {:.3}%", 100.0 * worst),
    }
}

fn polytest_orderings() -> Outcome {
    let start = Instant::now();
    let (mut d1_wins, mut close, mut floor_ok) = (0, 0, true);
    let mut min_mse = f64::INFINITY;
    for seed in 0..10 {
        let cfg = PolytestConfig {
            n_grid: vec![100, 800],
            ..PolytestConfig::new(seed)
        };
        let rows = polytest_study(&cfg).unwrap();
        let at = |n: usize, d: usize| rows.iter().find(|r| r.n == n && r.d == d).unwrap().test_mse;
        if [3, 10, 16].iter().all(|&d| at(100, 1) < at(100, d)) {
            d1_wins += 1;
        }
        let big: Vec<f64> = [3, 10, 16].iter().map(|&d| at(800, d)).collect();
        let (lo, hi) = big.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        if hi <= 2.0 * lo {
            close += 1;
        }
        for r in &rows {
            min_mse = min_mse.min(r.test_mse);
            floor_ok &= r.test_mse >= 0.0025 * 0.8;
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: d1_wins >= 7 && close >= 7 && floor_ok && within(elapsed, 600),
        detail: format!(
            "d=1 best at n=100 in {d1_wins}/10, d in {{3,10,16}} within 2x at n=800 in {close}/10, min MSE {min_mse:.5}, {elapsed:.2?}"
        ),
    }
}

fn stability_orderings() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    for seed in 0..20 {
        let rows = stability_study(&StabilityConfig::new(seed)).unwrap();
        let score = |m: &str| rows.iter().find(|r| r.model == m).unwrap().test_r2;
        if score("kernel") > score("linear") {
            wins += 1;
        }
    }
    let clean = StabilityConfig {
        corruption: CorruptionSpec::new(0.0, 6.0, CorruptionMode::PerCoordinate).unwrap(),
        ..StabilityConfig::new(0)
    };
    let control = stability_study(&clean).unwrap()[0].test_r2;
    let elapsed = start.elapsed();
    Outcome {
        pass: wins >= 16 && (control - 1.0).abs() <= 1e-6 && within(elapsed, 300),
        detail: format!("kernel beats linear in {wins}/20 seeds, clean linear R^2 {control:.9}, {elapsed:.2?}"),
    }
}

fn eigen_trends() -> Outcome {
    let start = Instant::now();
    let cfg = EigenConfig::new(0);
    let curves = eigen_study(&cfg).unwrap();
    let find = |p: f64, s: f64| curves.iter().find(|c| c.p == p && c.sigma == s).unwrap();
    let by_p: Vec<f64> = [0.03, 0.2, 0.5].iter().map(|&p| find(p, 6.0).mean_db()).collect();
    let monotone = by_p.windows(2).all(|w| w[0] < w[1]);
    let by_sigma: Vec<f64> = [2.0, 6.0, 10.0].iter().map(|&s| find(0.03, s).top_mean_abs_db(10)).collect();
    let spread = by_sigma.iter().cloned().fold(f64::MIN, f64::max) - by_sigma.iter().cloned().fold(f64::MAX, f64::min);
    let clean = find(0.0, 6.0);
    let zero = clean.db.iter().filter(|v| v.is_finite()).all(|&v| v == 0.0);
    let elapsed = start.elapsed();
    Outcome {
        pass: monotone && spread < 3.0 && zero && within(elapsed, 120),
        detail: format!(
            "mean dB over p {{0.03,0.2,0.5}}: {by_p:.2?}; top-10 |dB| over sigma {{2,6,10}}: {by_sigma:.2?} (spread {spread:.2}); clean exactly 0 dB: {zero}; {elapsed:.2?}"
        ),
    }
}

fn primal_dual() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let l = 10;
        let law = WeightLaw::new(WeightDist::GaussianIso { sigma: 1.0 }, BiasLaw::phase()).unwrap();
        let map = build_feature_map(l, 100, &DegreeSpec::binomial(l, 0.3).unwrap(), &law, Nonlinearity::Cosine, seed)
            .unwrap();
        let mut r = rng::tagged_stream(seed, "acceptance", 8);
        let mut gaussian = |rows: usize| DMatrix::from_fn(rows, l, |_, _| r.sample::<f64, _>(StandardNormal));
        let (x, x_new) = (gaussian(200), gaussian(50));
        let y: Vec<f64> = (0..200).map(|i| x[(i, 0)].sin() + x[(i, 1)]).collect();
        let (f, f_new) = (map.apply(&x).unwrap(), map.apply(&x_new).unwrap());
        let lambda = 0.1;
        let primal = ridge_fit(&f, &y, lambda).unwrap().predict(&f_new).unwrap();
        let dual = KernelRidge::fit(&(&f * f.transpose()), &y, lambda)
            .unwrap()
            .predict(&(&f_new * f.transpose()))
            .unwrap();
        for (a, b) in primal.iter().zip(&dual) {
            worst = worst.max((a - b).abs());
        }
    }
    Outcome {
        pass: worst <= 1e-6,
        detail: format!("max prediction gap {worst:.2e} over 5 instances (n=200, m=100)"),
    }
}

fn locality() -> Outcome {
    let (l, m) = (20, 5000);
    let law = WeightLaw::new(WeightDist::GaussianIso { sigma: 1.0 }, BiasLaw::phase()).unwrap();
    let map = build_feature_map(l, m, &DegreeSpec::binomial(l, 0.2).unwrap(), &law, Nonlinearity::Cosine, 9).unwrap();
    let mut r = rng::tagged_stream(9, "acceptance", 9);
    let x: Vec<f64> = (0..l).map(|_| r.random_range(-1.0..=1.0)).collect();
    let base = map.apply_one(&x).unwrap();
    let expected = map.degrees().iter().sum::<usize>() as f64 / (m * l) as f64;
    let sd = (expected * (1.0 - expected) / m as f64).sqrt();
    let (mut exact, mut in_band) = (true, 0);
    let mut fractions = Vec::with_capacity(l);
    for j in 0..l {
        let mut moved = x.clone();
        moved[j] += 0.37;
        let out = map.apply_one(&moved).unwrap();
        let mut affected = 0;
        for i in 0..m {
            let touches = map.neighborhood(i).contains(&j);
            let changed = map.output_columns(i).any(|c| out[c] != base[c]);
            exact &= touches == changed;
            affected += usize::from(changed);
        }
        let frac = affected as f64 / m as f64;
        in_band += usize::from((frac - expected).abs() <= 3.0 * sd);
        fractions.push(frac);
    }
    let lo = fractions.iter().cloned().fold(f64::MAX, f64::min);
    let hi = fractions.iter().cloned().fold(f64::MIN, f64::max);
    Outcome {
        pass: exact && in_band == l,
        detail: format!(
            "unaffected features unchanged exactly: {exact}; affected fraction in [{lo:.4}, {hi:.4}] vs expected {expected:.4} +- {:.4}",
            3.0 * sd
        ),
    }
}

fn all_studies() -> Vec<StudyOutput> {
    let conv_cfg = ConvergenceConfig::cosine_rbf(8, 7).unwrap();
    let poly_cfg = PolytestConfig::new(7);
    let stab_cfg = StabilityConfig::new(7);
    let eig_cfg = EigenConfig::new(7);
    vec![
        convergence::render(&conv_cfg, &convergence_study(&conv_cfg).unwrap()).unwrap(),
        polytest::render(&poly_cfg, &polytest_study(&poly_cfg).unwrap()).unwrap(),
        corruption::render_stability(&stab_cfg, &stability_study(&stab_cfg).unwrap()).unwrap(),
        corruption::render_eigen(&eig_cfg, &eigen_study(&eig_cfg).unwrap()).unwrap(),
    ]
}

fn determinism() -> Outcome {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(all_studies)
    };
    let (one, eight) = (run(1), run(8));
    let same: Vec<&str> = one
        .iter()
        .zip(&eight)
        .filter(|(a, b)| a.csv == b.csv && a.meta == b.meta)
        .map(|(a, _)| a.name.as_str())
        .collect();
    Outcome {
        pass: same.len() == 4,
        detail: format!("byte-identical under 1 and 8 threads: {same:?}"),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("closed-form parity", closed_form_parity),
        ("Monte Carlo convergence", monte_carlo_convergence),
        ("degree mixture identity", mixture_identity),
        ("degree-independent weight scaling", degree_independent_scaling),
        ("polynomial target orderings", polytest_orderings),
        ("stability orderings", stability_orderings),
        ("eigen amplification trends", eigen_trends),
        ("primal-dual equivalence", primal_dual),
        ("locality", locality),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let outcome = check();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2}. {name}: {}", k + 1, outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
