//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails. Run with `cargo test --release -p ltrc-cli --test acceptance`.

use std::fs;
use std::num::NonZeroUsize;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gauss_quad::GaussLegendre;
use ltrc::data::Span;
use ltrc::estimators::{logrank_scores, peto_scores, CumulativeHazard, RiskSetTable, SurvivalCurve};
use ltrc::evaluation::{censoring_km, ibs, PredictionSet};
use ltrc::ltrcart::{exposures, poisson_node_deviance, NodeStats};
use ltrc::simulation::{
    calibrate_censoring, piecewise_ph_invert, run_ibs_experiment, run_null_selection_experiment,
    run_recovery_experiment, Baseline, Distribution, Experiment, Family, Generator, Methods, ResultRow,
    ScenarioSpec, Setup, TvParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const MASTER: u64 = 20261016;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget_secs: u64, detail: String) -> Outcome {
    ensure(
        elapsed.as_secs() < budget_secs,
        format!("{detail}; {:.1}s of {budget_secs}s budget", elapsed.as_secs_f64()),
    )
}

fn spec(name: &str, experiment: Experiment, setup: Setup, family: Family, truncation: f64, censoring: f64, n: usize) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        experiment,
        setup,
        family,
        truncation,
        censoring,
        n,
        trials: None,
    }
}

fn metric(rows: &[ResultRow], method: &str, name: &str) -> f64 {
    rows.iter()
        .find(|r| r.method == method && r.metric == name)
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
}

/// Right-censored sample (n <= 50) plus a random split of each subject into consecutive pieces.
fn split_case(rng: &mut ChaCha8Rng) -> (Vec<Span<f64>>, Vec<Span<f64>>, Vec<usize>) {
    let n = rng.random_range(2..=50);
    let coarse = rng.random_bool(0.5);
    let original: Vec<Span<f64>> = (0..n)
        .map(|_| {
            let t: f64 = rng.random_range(0.05..10.0);
            Span::new(0.0, if coarse { (t * 2.0).ceil() / 2.0 } else { t }, rng.random_bool(0.7))
        })
        .collect();
    let (mut pieces, mut owner) = (Vec::new(), Vec::new());
    for (i, s) in original.iter().enumerate() {
        let k = rng.random_range(0..=3);
        let mut cuts: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..s.right)).filter(|&c| c > 0.0).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut bounds = vec![0.0];
        bounds.extend(cuts);
        bounds.push(s.right);
        for w in 0..bounds.len() - 1 {
            pieces.push(Span::new(bounds[w], bounds[w + 1], s.event && w + 2 == bounds.len()));
            owner.push(i);
        }
    }
    (original, pieces, owner)
}

fn contribution(s: &Span<f64>, h: &CumulativeHazard<f64>) -> f64 {
    let jump = h.eval(s.right) - h.step_function().left_limit(s.right);
    (if s.event { jump.ln() } else { 0.0 }) - (h.eval(s.right) - h.eval(s.left))
}

fn equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut identical = true;
    for _ in 0..1000 {
        let (original, pieces, owner) = split_case(&mut rng);
        identical &= RiskSetTable::from_spans(&original) == RiskSetTable::from_spans(&pieces)
            && SurvivalCurve::product_limit(&original) == SurvivalCurve::product_limit(&pieces)
            && CumulativeHazard::nelson_aalen(&original) == CumulativeHazard::nelson_aalen(&pieces);
        let whole = peto_scores(&original).map_err(|e| e.to_string())?;
        let parts = logrank_scores(&pieces).map_err(|e| e.to_string())?;
        let h = CumulativeHazard::nelson_aalen(&pieces);
        let e_whole = exposures(&original, &h);
        let e_parts = exposures(&pieces, &h);
        let n = original.len();
        let (mut u, mut e, mut l) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (k, &i) in owner.iter().enumerate() {
            u[i] += parts[k];
            e[i] += e_parts[k];
            l[i] += contribution(&pieces[k], &h);
        }
        for i in 0..n {
            worst = worst
                .max((whole[i] - u[i]).abs())
                .max((e_whole[i] - e[i]).abs())
                .max((contribution(&original[i], &h) - l[i]).abs());
        }
    }
    ensure(identical, "estimators differ on pseudo-subjects".into())?;
    ensure(worst < 1e-10, format!("max additivity error {worst:.2e}"))?;
    within(start.elapsed(), 60, format!("bit-identical estimators, max additivity error {worst:.2e}"))
}

fn km_textbook(times: &[f64], events: &[bool], at: f64) -> f64 {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let (mut remaining, mut s, mut k) = (times.len(), 1.0, 0);
    while k < order.len() && times[order[k]] <= at {
        let t = times[order[k]];
        let (mut deaths, mut leaving) = (0, 0);
        while k < order.len() && times[order[k]] == t {
            deaths += usize::from(events[order[k]]);
            leaving += 1;
            k += 1;
        }
        s *= 1.0 - deaths as f64 / remaining as f64;
        remaining -= leaving;
    }
    s
}

fn estimator_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut km_worst, mut peto_worst) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(2..=40);
        let coarse = rng.random_bool(0.5);
        let (times, mut events): (Vec<f64>, Vec<bool>) = (0..n)
            .map(|_| {
                let t: f64 = rng.random_range(0.01..5.0);
                (if coarse { t.ceil() } else { t }, rng.random_bool(0.6))
            })
            .unzip();
        let spans: Vec<Span<f64>> = times.iter().zip(&events).map(|(&t, &e)| Span::new(0.0, t, e)).collect();
        let km = SurvivalCurve::product_limit(&spans);
        for &p in times.iter().chain(&[0.0, 6.0]) {
            km_worst = km_worst.max((km.eval(p) - km_textbook(&times, &events, p)).abs());
            km_worst = km_worst.max((km.eval(p - 1e-9) - km_textbook(&times, &events, p - 1e-9)).abs());
        }
        let last = (0..n).max_by(|&a, &b| times[a].total_cmp(&times[b])).unwrap();
        events[last] = true;
        let spans: Vec<Span<f64>> = times.iter().zip(&events).map(|(&t, &e)| Span::new(0.0, t, e)).collect();
        let sum: f64 = peto_scores(&spans).map_err(|e| e.to_string())?.iter().sum();
        peto_worst = peto_worst.max(sum.abs());
    }
    let mut exact = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..=40);
        let ev: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..3.0)).collect();
        let stats = NodeStats::compute(&ev, &e);
        let c: Vec<f64> = ev.iter().map(|&d| f64::from(u8::from(d))).collect();
        let oracle: f64 = c
            .iter()
            .zip(&e)
            .map(|(&c, &t)| {
                let fit = t * stats.theta;
                2.0 * ((if c == 0.0 { 0.0 } else { c * (c / fit).ln() }) - (c - fit))
            })
            .sum();
        exact &= poisson_node_deviance(&c, &e, stats.theta) == oracle;
    }
    ensure(
        km_worst < 1e-12 && peto_worst < 1e-10 && exact,
        format!("KM max diff {km_worst:.1e}, max |sum of scores| {peto_worst:.1e}, deviance exact: {exact}"),
    )
}

fn unbiasedness() -> Outcome {
    let start = Instant::now();
    let s = spec("null", Experiment::Null, Setup::Tree, Family::Exponential, 2.0, 0.2, 100);
    let rows = run_null_selection_experiment(&s, 2000, MASTER, &Methods::default()).map_err(|e| e.to_string())?;
    let p = metric(&rows, "ltrcit", "uniformity_p");
    let freqs: Vec<String> = (1..=6).map(|j| format!("{:.3}", metric(&rows, "ltrcit", &format!("freq_X{j}")))).collect();
    ensure(p > 0.01, format!("uniformity p = {p:.3}; frequencies [{}]", freqs.join(", ")))?;
    within(start.elapsed(), 600, format!("uniformity p = {p:.3}; frequencies [{}]", freqs.join(", ")))
}

fn recovery_rate(censoring: f64, n: usize) -> Result<(f64, f64), String> {
    let s = spec(&format!("wi_{censoring}_{n}"), Experiment::Recovery, Setup::Tree, Family::WeibullIncreasing, 2.0, censoring, n);
    let rows = run_recovery_experiment(&s, 500, MASTER, &Methods::default()).map_err(|e| e.to_string())?;
    Ok((100.0 * metric(&rows, "ltrcit", "mean_recovered"), 100.0 * metric(&rows, "ltrcart", "mean_recovered")))
}

fn recovery_reproduction() -> Outcome {
    let start = Instant::now();
    let light = recovery_rate(0.2, 300)?;
    let heavy = recovery_rate(0.5, 300)?;
    let small = recovery_rate(0.2, 100)?;
    let large = recovery_rate(0.2, 500)?;
    let detail = format!(
        "light {:.1}/{:.1}, heavy {:.1}/{:.1}, N=100 {:.1}/{:.1}, N=500 {:.1}/{:.1} (ltrcit/ltrcart %)",
        light.0, light.1, heavy.0, heavy.1, small.0, small.1, large.0, large.1
    );
    let ok = (light.0 - 84.2).abs() <= 10.0
        && (light.1 - 85.8).abs() <= 10.0
        && heavy.0 < light.0
        && heavy.1 < light.1
        && large.0 > small.0
        && large.1 > small.1;
    ensure(ok, detail.clone())?;
    within(start.elapsed(), 1800, detail)
}

fn time_varying_recovery() -> Outcome {
    let start = Instant::now();
    let s = spec("tv2", Experiment::Recovery, Setup::TvType2, Family::Gompertz, 0.0, 0.0, 300);
    let rows = run_recovery_experiment(&s, 500, MASTER, &Methods::default()).map_err(|e| e.to_string())?;
    let rate = 100.0 * metric(&rows, "ltrcit", "mean_recovered");
    let (x1, x2) = (metric(&rows, "ltrcit", "mean_uses_X1"), metric(&rows, "ltrcit", "mean_uses_X2"));
    let detail = format!("recovery {rate:.1}%, X1 used {:.1}%, X2 used {:.1}%", 100.0 * x1, 100.0 * x2);
    ensure((rate - 89.3).abs() <= 8.0 && x1 >= 0.99 && x2 >= 0.99, detail.clone())?;
    within(start.elapsed(), 1200, detail)
}

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

fn ks_distance(d: &Distribution, rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut x = (0..100_000).map(|_| d.sample(rng)).collect::<Result<Vec<f64>, _>>().map_err(|e| e.to_string())?;
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = 1.0 - d.survival(t);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max))
}

fn generator_validity() -> Outcome {
    let gl = GaussLegendre::new(NonZeroUsize::new(40).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut plug = 0.0f64;
    for p in [TvParams::exponential(), TvParams::weibull(), TvParams::gompertz()] {
        for kind in 0..3 {
            for _ in 0..100_000 {
                let switches = if kind == 0 { 1 } else { 3 };
                let mut s: Vec<f64> = (0..switches).map(|_| rng.random_range(0.6..6.0)).collect();
                s.sort_by(f64::total_cmp);
                let mut path = vec![(0.0, 0.0)];
                for (k, t) in s.into_iter().enumerate() {
                    let z = if kind == 2 { rng.random_range(0.0..10.0) > 5.0 } else { k % 2 == 0 };
                    path.push((t, f64::from(u8::from(z))));
                }
                let lin = p.beta * f64::from(rng.random_range(0..=1u8));
                let u: f64 = rng.random_range(1e-12..1.0);
                let t = piecewise_ph_invert(&p.baseline, lin, p.beta_z, &path, u).map_err(|e| e.to_string())?;
                plug = plug.max((quadrature_hazard(&gl, &p.baseline, lin, p.beta_z, &path, t) + u.ln()).abs());
            }
        }
    }

    let mut laws = vec![Distribution::Weibull { shape: 3.0, scale: 6.2 }, Distribution::Gompertz { rate: 0.2, alpha: 0.1 }];
    for family in [Family::Exponential, Family::WeibullIncreasing, Family::WeibullDecreasing, Family::Lognormal, Family::Bathtub] {
        let s = spec("ks", Experiment::Recovery, Setup::Tree, family, 0.0, 0.0, 100);
        laws.extend(s.leaf_distributions().map_err(|e| e.to_string())?);
    }
    let mut ks = 0.0f64;
    for d in &laws {
        ks = ks.max(ks_distance(d, &mut rng)?);
    }

    let mut calib = 0.0f64;
    for s in [
        spec("c1", Experiment::Recovery, Setup::Tree, Family::WeibullIncreasing, 2.0, 0.0, 100),
        spec("c2", Experiment::Recovery, Setup::Tree, Family::Bathtub, 2.0, 0.0, 100),
        spec("c3", Experiment::Recovery, Setup::Linear, Family::Exponential, 1.0, 0.0, 100),
        spec("c4", Experiment::Recovery, Setup::TvType2, Family::Gompertz, 0.0, 0.0, 100),
    ] {
        let g = Generator::new(&s).map_err(|e| e.to_string())?;
        for target in [0.2, 0.5] {
            let lambda = calibrate_censoring(&g, target).map_err(|e| e.to_string())?;
            let mut censored = 0usize;
            for i in 0..10_000 {
                let subject = g.draw_subject(&mut rng).map_err(|e| e.to_string())?;
                let recs = g.observe(i, &subject, lambda, &mut rng).map_err(|e| e.to_string())?;
                censored += usize::from(!recs.last().unwrap().event());
            }
            calib = calib.max((censored as f64 / 10_000.0 - target).abs());
        }
    }
    ensure(
        plug < 1e-10 && ks < 0.01 && calib <= 0.02,
        format!("max plug-back error {plug:.1e}, max KS {ks:.4} over {} laws, max calibration miss {calib:.3}", laws.len()),
    )
}

fn curve(knots: &[f64], values: &[f64]) -> SurvivalCurve<f64> {
    SurvivalCurve::new(knots.to_vec(), values.to_vec()).unwrap()
}

fn score(curves: Vec<SurvivalCurve<f64>>, times: &[f64], events: &[bool]) -> Result<f64, String> {
    let g = censoring_km(times, events);
    let preds = PredictionSet::new(curves, times.to_vec(), events.to_vec()).map_err(|e| e.to_string())?;
    Ok(ibs(&preds, &g).map_err(|e| e.to_string())?.value)
}

fn ibs_machinery() -> Outcome {
    let times = [0.7, 1.3, 2.0, 2.0, 5.5];
    let perfect = score(times.iter().map(|&t| curve(&[t], &[0.0])).collect(), &times, &[true; 5])?;
    let half = score(vec![curve(&[0.0], &[0.5]); 5], &times, &[true; 5])?;
    let fixture = score(
        vec![curve(&[1.0], &[0.2]), curve(&[1.0, 3.0], &[0.6, 0.1]), curve(&[2.0], &[0.5])],
        &[1.0, 2.0, 4.0],
        &[true; 3],
    )?;
    let err = (fixture - 1.15 / 12.0).abs();
    ensure(
        perfect == 0.0 && half == 0.25 && err < 1e-12,
        format!("perfect {perfect}, constant-1/2 {half}, fixture error {err:.1e}"),
    )
}

fn prediction_direction() -> Outcome {
    let s = spec("ibs", Experiment::Ibs, Setup::Tree, Family::Exponential, 2.0, 0.2, 300);
    let rows = run_ibs_experiment(&s, 200, MASTER, &Methods::default()).map_err(|e| e.to_string())?;
    let med = |m: &str| metric(&rows, m, "median_ibs");
    let (it, cart, root) = (med("ltrcit"), med("ltrcart"), med("root_km"));
    let (p_it, p_cart) = (metric(&rows, "ltrcit:root_km", "signed_rank_p"), metric(&rows, "ltrcart:root_km", "signed_rank_p"));
    ensure(
        it < root && cart < root && p_it < 0.01 && p_cart < 0.01,
        format!("median IBS ltrcit {it:.4}, ltrcart {cart:.4}, root {root:.4}; p = {p_it:.1e}, {p_cart:.1e}"),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ltrc")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn determinism() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let write = |name: &str, text: &str| fs::write(dir.path().join(name), text).map_err(|e| e.to_string());
    write("schema.toml", "[[columns]]\nname = \"x\"\nkind = \"numeric\"\n\n[[columns]]\nname = \"g\"\nkind = \"nominal\"\nlevels = [\"a\", \"b\", \"c\"]\n")?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut long = String::from("id,time,event,x,g\n");
    for i in 0..300 {
        let mut t: f64 = rng.random_range(0.0..2.0);
        for _ in 0..rng.random_range(1..4) {
            let x: f64 = rng.random_range(0.0..1.0);
            let g = ["a", "b", "c"][rng.random_range(0..3)];
            long.push_str(&format!("s{i},{t},0,{x},{g}\n"));
            t += rng.random_range(0.1..1.0) / (1.0 + 3.0 * x);
        }
        long.push_str(&format!("s{i},{t},{},,\n", u8::from(rng.random_bool(0.7))));
    }
    write("long.csv", &long)?;
    write("new.csv", "id,x,g\nu,0.1,a\nv,0.9,c\n")?;
    write(
        "grid.toml",
        "trials = 2\nseed = 3\n\n[[scenario]]\nname = \"r\"\nexperiment = \"recovery\"\nsetup = \"tree\"\nfamily = \"lognormal\"\ntruncation = 1.0\ncensoring = 0.2\nn = 100\n\n[[scenario]]\nname = \"i\"\nexperiment = \"ibs\"\nsetup = \"tv_type1\"\nfamily = \"weibull\"\ncensoring = 0.2\nn = 100\n",
    )?;
    let mut outputs = Vec::new();
    for round in 0..2 {
        let tag = |s: &str| p(&format!("{s}{round}"));
        run_cli(&["reformat", "--data", &p("long.csv"), "--schema", &p("schema.toml"), "--out", &tag("wide.csv")])?;
        for algo in ["ltrcit", "ltrcart"] {
            let model = tag(&format!("{algo}.json"));
            run_cli(&["fit", "--algo", algo, "--seed", "4", "--data", &tag("wide.csv"), "--schema", &p("schema.toml"), "--out", &model])?;
            run_cli(&["predict", "--model", &model, "--data", &p("new.csv"), "--out", &tag(&format!("{algo}.pred"))])?;
        }
        run_cli(&["benchmark", "--scenarios", &p("grid.toml"), "--out", &tag("bench.csv")])?;
        let mut files: Vec<Vec<u8>> = Vec::new();
        for name in ["wide.csv", "ltrcit.json", "ltrcit.dot", "ltrcit.pred", "ltrcart.json", "ltrcart.dot", "ltrcart.pred", "bench.csv"] {
            let path = if name.ends_with(".dot") {
                Path::new(&tag(&name.replace(".dot", ".json"))).with_extension("dot")
            } else {
                tag(name).into()
            };
            files.push(fs::read(path).map_err(|e| e.to_string())?);
        }
        outputs.push(files);
    }
    ensure(outputs[0] == outputs[1], format!("{} artifacts from reformat/fit/predict/benchmark compared", outputs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("pseudo-subject equivalence", equivalence),
        ("estimator oracles", estimator_oracles),
        ("unbiased split selection", unbiasedness),
        ("recovery-rate reproduction", recovery_reproduction),
        ("time-varying recovery", time_varying_recovery),
        ("generator validity", generator_validity),
        ("IBS machinery", ibs_machinery),
        ("prediction direction", prediction_direction),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (verdict, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {verdict}: {name}: {detail} [{:.1}s]", k + 1, start.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
