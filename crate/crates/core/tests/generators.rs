use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use ltrc::simulation::{
    calibrate_censoring, piecewise_ph_invert, Baseline, Distribution, Experiment, Family, Generator,
    ScenarioSpec, Setup, TvParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 100_000;

fn spec(setup: Setup, family: Family, truncation: f64, censoring: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: format!("{setup:?}-{family:?}-{truncation}-{censoring}"),
        experiment: Experiment::Recovery,
        setup,
        family,
        truncation,
        censoring,
        n: 100,
        trials: None,
    }
}

/// Cumulative hazard along a covariate path by Gauss–Legendre quadrature of the hazard.
/// The first segment is integrated after substituting `t = b s^5`, which turns the
/// integrable singularity of a Weibull hazard with shape below 1 into a polynomial.
fn quadrature_hazard(gl: &GaussLegendre, b0: &Baseline, lin: f64, beta_z: f64, path: &[(f64, f64)], t: f64) -> f64 {
    let mut total = 0.0;
    for (k, &(start, z)) in path.iter().enumerate() {
        if t <= start {
            break;
        }
        let end = path.get(k + 1).map_or(t, |n| n.0.min(t));
        let m = (lin + beta_z * z).exp();
        total += if start == 0.0 {
            gl.integrate(0.0, 1.0, |s| m * b0.hazard(end * s.powi(5)) * 5.0 * end * s.powi(4))
        } else {
            gl.integrate(start, end, |x| m * b0.hazard(x))
        };
    }
    total
}

fn random_path(rng: &mut ChaCha8Rng, kind: usize) -> Vec<(f64, f64)> {
    let switches = if kind == 0 { 1 } else { 3 };
    let mut s: Vec<f64> = (0..switches).map(|_| rng.random_range(0.6..6.0)).collect();
    s.sort_by(f64::total_cmp);
    let mut path = vec![(0.0, 0.0)];
    for (k, t) in s.into_iter().enumerate() {
        let z = match kind {
            2 => f64::from(u8::from(rng.random_range(0.0..10.0) > 5.0)),
            _ => f64::from(u8::from(k % 2 == 0)),
        };
        path.push((t, z));
    }
    path
}

#[test]
fn piecewise_inversion_plug_back() {
    let gl = GaussLegendre::new(NonZeroUsize::new(40).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for params in [TvParams::exponential(), TvParams::weibull(), TvParams::gompertz()] {
        for kind in 0..3 {
            let mut worst = 0.0f64;
            for _ in 0..DRAWS {
                let path = random_path(&mut rng, kind);
                let x1 = f64::from(rng.random_range(0..=1u8));
                let u: f64 = rng.random_range(1e-12..1.0);
                let t = piecewise_ph_invert(&params.baseline, params.beta * x1, params.beta_z, &path, u).unwrap();
                let h = quadrature_hazard(&gl, &params.baseline, params.beta * x1, params.beta_z, &path, t);
                worst = worst.max((h + u.ln()).abs());
            }
            assert!(worst < 1e-10, "{params:?} path kind {kind}: max |H(T) + ln u| = {worst}");
        }
    }
}

#[test]
fn exponential_quantile_example() {
    let d = Distribution::Exponential { rate: 0.1 };
    assert!((d.quantile_survival((-1.0f64).exp()).unwrap() - 10.0).abs() < 1e-12);
}

#[test]
fn bathtub_draws_plug_back() {
    let d = Distribution::Bathtub { a: 0.01, b: 1.0, c: 5.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..10_000 {
        let u: f64 = rng.random_range(1e-9..1.0);
        let t = d.quantile_survival(u).unwrap();
        assert!((d.survival(t) - u).abs() < 1e-9);
    }
}

fn ks_distance(d: &Distribution, rng: &mut ChaCha8Rng) -> f64 {
    let mut x: Vec<f64> = (0..DRAWS).map(|_| d.sample(rng).unwrap()).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = 1.0 - d.survival(t);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn draws_follow_analytic_survival() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut laws = vec![
        Distribution::Weibull { shape: 3.0, scale: 6.2 },
        Distribution::Gompertz { rate: 0.2, alpha: 0.1 },
    ];
    for family in [
        Family::Exponential,
        Family::WeibullIncreasing,
        Family::WeibullDecreasing,
        Family::Lognormal,
        Family::Bathtub,
    ] {
        laws.extend(spec(Setup::Tree, family, 0.0, 0.0).leaf_distributions().unwrap());
    }
    for d in laws {
        let ks = ks_distance(&d, &mut rng);
        assert!(ks < 0.01, "{d:?}: KS distance {ks}");
    }
}

fn censored_fraction(generator: &Generator, lambda: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut censored = 0;
    for i in 0..10_000 {
        let s = generator.draw_subject(&mut rng).unwrap();
        let recs = generator.observe(i, &s, lambda, &mut rng).unwrap();
        censored += usize::from(!recs.last().unwrap().event());
    }
    censored as f64 / 10_000.0
}

#[test]
fn calibrated_censoring_holds_on_fresh_seeds() {
    let mut specs = Vec::new();
    for family in [
        Family::Exponential,
        Family::WeibullIncreasing,
        Family::WeibullDecreasing,
        Family::Lognormal,
        Family::Bathtub,
    ] {
        specs.push(spec(Setup::Tree, family, 2.0, 0.0));
    }
    specs.push(spec(Setup::Linear, Family::Exponential, 1.0, 0.0));
    specs.push(spec(Setup::Nonlinear, Family::WeibullDecreasing, 3.0, 0.0));
    specs.push(spec(Setup::TvType2, Family::Gompertz, 0.0, 0.0));
    specs.push(spec(Setup::TvContinuous, Family::Weibull, 0.0, 0.0));
    for s in specs {
        let g = Generator::new(&s).unwrap();
        for (k, target) in [0.2, 0.5].into_iter().enumerate() {
            let lambda = calibrate_censoring(&g, target).unwrap();
            let got = censored_fraction(&g, lambda, 900 + k as u64);
            assert!((got - target).abs() <= 0.02, "{}: target {target}, got {got}", s.name);
        }
    }
}

#[test]
fn censoring_rate_is_monotone() {
    let g = Generator::new(&spec(Setup::Tree, Family::Lognormal, 2.0, 0.0)).unwrap();
    let fractions: Vec<f64> = [0.01, 0.05, 0.2, 1.0].iter().map(|&l| censored_fraction(&g, l, 5)).collect();
    assert!(fractions.windows(2).all(|w| w[0] <= w[1]), "{fractions:?}");
}

#[test]
fn observation_process_respects_ordering() {
    let g = Generator::new(&spec(Setup::Tree, Family::Bathtub, 3.0, 0.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for i in 0..5000 {
        let s = g.draw_subject(&mut rng).unwrap();
        assert!(s.time > s.left);
        let r = &g.observe(i, &s, 0.4, &mut rng).unwrap()[0];
        assert!(r.left() < r.right());
        if r.event() {
            assert_eq!(r.right(), s.time);
        } else {
            assert!(r.right() < s.time);
        }
    }
}

#[test]
fn linear_setup_log_rate_ratio_is_two() {
    let s = spec(Setup::Linear, Family::Exponential, 0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let rate = |theta: f64, rng: &mut ChaCha8Rng| {
        let d = s.ph_distribution(theta).unwrap();
        let total: f64 = (0..DRAWS).map(|_| d.sample(rng).unwrap()).sum();
        DRAWS as f64 / total
    };
    let high = rate(0.0, &mut rng);
    let low = rate(-2.0, &mut rng);
    assert!(((high / low).ln() - 2.0).abs() < 0.03);
    assert_eq!(s.ph_distribution(0.0).unwrap(), Distribution::Exponential { rate: 1.0 });
    let wi = spec(Setup::Linear, Family::WeibullIncreasing, 0.0, 0.0);
    assert_eq!(wi.ph_distribution(0.5).unwrap(), Distribution::Weibull { shape: 2.0, scale: 10.0 * 0.5f64.exp() });
}

#[test]
fn time_varying_parameters() {
    let p = TvParams::exponential();
    assert_eq!((p.beta, p.beta_z), (0.8, 1.4));
    assert_eq!(p.baseline, Baseline::Exponential { rate: 0.1 });
}

#[test]
fn test_set_nodes_order_by_risk() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for p in [TvParams::exponential(), TvParams::weibull(), TvParams::gompertz()] {
        let means: Vec<f64> = [p.beta + p.beta_z, p.beta_z, p.beta, 0.0]
            .iter()
            .map(|&theta| {
                (0..20_000)
                    .map(|_| piecewise_ph_invert(&p.baseline, theta, 0.0, &[(0.0, 0.0)], rng.random_range(1e-12..1.0)).unwrap())
                    .sum::<f64>()
                    / 20_000.0
            })
            .collect();
        assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
    }
}

#[test]
fn time_varying_test_set_shapes() {
    let g = Generator::new(&spec(Setup::TvType1, Family::Gompertz, 0.0, 0.0)).unwrap();
    let (test, laws) = g.test_set(&mut ChaCha8Rng::seed_from_u64(71)).unwrap();
    assert_eq!(laws.len(), test.len());
    for (i, r) in test.records().iter().enumerate() {
        let z = r.covariates().get(1);
        if z == 1.0 {
            assert_eq!(r.left(), 0.6);
            assert!(r.event());
        } else {
            assert_eq!(r.left(), 0.0);
            assert!(r.right() <= 6.0);
        }
        assert_eq!(r.covariates().get(0), if i % 4 < 2 { 1.0 } else { 0.0 });
    }
}

#[test]
fn uncensored_time_varying_data_ends_in_events() {
    let g = Generator::new(&spec(Setup::TvType2, Family::Exponential, 0.0, 0.0)).unwrap();
    let d = g.dataset(0.0, &mut ChaCha8Rng::seed_from_u64(81)).unwrap();
    assert_eq!(d.event_count(), 100);
}
