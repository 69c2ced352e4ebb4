//! Seeded experiment drivers producing long-format result tables.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calibrate::calibrate_censoring;
use super::generate::Generator;
use super::scenario::{Experiment, ScenarioFile, ScenarioSpec};
use crate::data::Dataset;
use crate::error::{DataError, SimError};
use crate::estimators::SurvivalCurve;
use crate::evaluation::{censoring_km, ibs, structure_recovered, wilcoxon_signed_rank, PredictionSet};
use crate::ltrcart::{fit_ltrcart, root_reductions, CartControls};
use crate::ltrcit::{fit_ltrcit, root_tests, CtreeControls};
use crate::stats::chi_square_uniformity;

/// Controls of both algorithms, shared by every scenario of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Methods {
    pub ltrcit: CtreeControls,
    pub ltrcart: CartControls,
}

/// One line of a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// Outcome of one trial of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub method: String,
    pub recovered: Option<bool>,
    pub selected_vars: Vec<usize>,
    pub leaves: usize,
    pub ibs: Option<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed of trial `trial` of scenario `name`; the trial's ChaCha8 stream is seeded from it.
pub fn trial_seed(master: u64, name: &str, trial: usize) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(name)) ^ splitmix64(trial as u64))
}

fn row(spec: &ScenarioSpec, method: &str, seed: u64, metric: impl Into<String>, value: f64) -> ResultRow {
    ResultRow {
        scenario: spec.name.clone(),
        method: method.to_string(),
        seed,
        metric: metric.into(),
        value,
    }
}

fn flag(b: bool) -> f64 {
    f64::from(u8::from(b))
}

fn run_trials<F>(spec: &ScenarioSpec, trials: usize, master: u64, f: F) -> Result<Vec<Vec<TrialResult>>, SimError>
where
    F: Fn(u64, &mut ChaCha8Rng) -> Result<Vec<TrialResult>, SimError> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(master, &spec.name, t);
            f(seed, &mut ChaCha8Rng::seed_from_u64(seed))
        })
        .collect()
}

fn fit_both(
    data: &Dataset<f64>,
    methods: &Methods,
    seed: u64,
) -> Result<(crate::ltrcit::LtrcitModel<f64>, crate::ltrcart::LtrcartModel<f64>), SimError> {
    Ok((fit_ltrcit(data, &methods.ltrcit)?, fit_ltrcart(data, &methods.ltrcart, seed)?))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Per trial and method: structure recovery, leaf count and which covariates are split on.
/// Summary rows give the mean of each metric over trials.
pub fn run_recovery_experiment(
    spec: &ScenarioSpec,
    trials: usize,
    master: u64,
    methods: &Methods,
) -> Result<Vec<ResultRow>, SimError> {
    let generator = Generator::new(spec)?;
    let truth = generator.truth();
    let lambda_d = calibrate_censoring(&generator, spec.censoring)?;
    let k = generator.schema().len();
    let results = run_trials(spec, trials, master, |seed, rng| {
        let data = generator.dataset(lambda_d, rng)?;
        let (it, cart) = fit_both(&data, methods, seed)?;
        let entry = |method: &str, recovered: Option<bool>, used: Vec<usize>, leaves| TrialResult {
            seed,
            method: method.into(),
            recovered,
            selected_vars: used,
            leaves,
            ibs: None,
        };
        Ok(vec![
            entry(
                "ltrcit",
                truth.as_ref().map(|t| structure_recovered(&it.tree, t)),
                it.tree.used_covariates().into_iter().collect(),
                it.tree.leaf_count(),
            ),
            entry(
                "ltrcart",
                truth.as_ref().map(|t| structure_recovered(&cart.tree, t)),
                cart.tree.used_covariates().into_iter().collect(),
                cart.tree.leaf_count(),
            ),
        ])
    })?;
    let mut rows = Vec::new();
    for r in results.iter().flatten() {
        if let Some(rec) = r.recovered {
            rows.push(row(spec, &r.method, r.seed, "recovered", flag(rec)));
        }
        rows.push(row(spec, &r.method, r.seed, "leaves", r.leaves as f64));
        for j in 0..k {
            rows.push(row(spec, &r.method, r.seed, format!("uses_X{}", j + 1), flag(r.selected_vars.contains(&j))));
        }
    }
    if trials > 0 {
        let per_trial: Vec<ResultRow> = rows.clone();
        for method in ["ltrcit", "ltrcart"] {
            let mut metrics: Vec<String> = Vec::new();
            for r in per_trial.iter().filter(|r| r.method == method) {
                if !metrics.contains(&r.metric) {
                    metrics.push(r.metric.clone());
                }
            }
            for m in metrics {
                let v = mean(per_trial.iter().filter(|r| r.method == method && r.metric == m).map(|r| r.value));
                rows.push(row(spec, method, master, format!("mean_{m}"), v));
            }
        }
    }
    Ok(rows)
}

/// First-split covariate (1-based) per trial under a response independent of every
/// covariate. The conditional-inference tree picks the smallest root p-value; the
/// relative-risk tree the largest root deviance reduction. Summary rows give selection
/// frequencies and a chi-square uniformity p-value.
pub fn run_null_selection_experiment(
    spec: &ScenarioSpec,
    trials: usize,
    master: u64,
    methods: &Methods,
) -> Result<Vec<ResultRow>, SimError> {
    if spec.experiment != Experiment::Null {
        return Err(SimError::Scenario(format!("{}: not a null-selection scenario", spec.name)));
    }
    let generator = Generator::new(spec)?;
    let lambda_d = calibrate_censoring(&generator, spec.censoring)?;
    let k = generator.schema().len();
    let results = run_trials(spec, trials, master, |seed, rng| {
        let data = generator.dataset(lambda_d, rng)?;
        let it = root_tests(&data)?.covariate;
        let reductions = root_reductions(&data, methods.ltrcart.min_bucket);
        let mut cart = None;
        for (j, r) in reductions.iter().enumerate() {
            if let Some(r) = *r {
                if cart.is_none_or(|(_, best)| r > best) {
                    cart = Some((j, r));
                }
            }
        }
        let mut out = vec![TrialResult {
            seed,
            method: "ltrcit".into(),
            recovered: None,
            selected_vars: vec![it],
            leaves: 0,
            ibs: None,
        }];
        if let Some((j, _)) = cart {
            out.push(TrialResult {
                seed,
                method: "ltrcart".into(),
                recovered: None,
                selected_vars: vec![j],
                leaves: 0,
                ibs: None,
            });
        }
        Ok(out)
    })?;
    let mut rows = Vec::new();
    let mut counts = [vec![0usize; k], vec![0usize; k]];
    for r in results.iter().flatten() {
        let j = r.selected_vars[0];
        counts[usize::from(r.method == "ltrcart")][j] += 1;
        rows.push(row(spec, &r.method, r.seed, "root_split", (j + 1) as f64));
    }
    if trials > 0 {
        for (m, method) in ["ltrcit", "ltrcart"].iter().enumerate() {
            let total: usize = counts[m].iter().sum();
            if total == 0 {
                continue;
            }
            for j in 0..k {
                rows.push(row(spec, method, master, format!("freq_X{}", j + 1), counts[m][j] as f64 / total as f64));
            }
            rows.push(row(spec, method, master, "uniformity_p", chi_square_uniformity(&counts[m])));
        }
    }
    Ok(rows)
}

/// Integrated Brier score on a companion test set for both trees, a root-only tree (the
/// product-limit curve of all training data) and the true survival functions. Summary rows
/// give medians and two-sided signed-rank p-values for each pair of methods.
pub fn run_ibs_experiment(
    spec: &ScenarioSpec,
    trials: usize,
    master: u64,
    methods: &Methods,
) -> Result<Vec<ResultRow>, SimError> {
    const METHODS: [&str; 4] = ["ltrcit", "ltrcart", "root_km", "oracle"];
    let generator = Generator::new(spec)?;
    let lambda_d = calibrate_censoring(&generator, spec.censoring)?;
    let results = run_trials(spec, trials, master, |seed, rng| {
        let train = generator.dataset(lambda_d, rng)?;
        let (test, laws) = generator.test_set(rng)?;
        let (it, cart) = fit_both(&train, methods, seed)?;
        let times: Vec<f64> = test.records().iter().map(|r| r.right()).collect();
        let events: Vec<bool> = test.records().iter().map(|r| r.event()).collect();
        let g = censoring_km(&times, &events);
        let horizon = times.iter().copied().fold(0.0, f64::max);
        let root = SurvivalCurve::product_limit(&train.spans());
        let mut curves: [Vec<SurvivalCurve<f64>>; 4] = Default::default();
        for (rec, law) in test.records().iter().zip(&laws) {
            let x = rec.covariates().values();
            curves[0].push(it.predict(x)?.clone());
            curves[1].push(cart.predict(x)?.1);
            curves[2].push(root.clone());
            curves[3].push(law.curve(horizon));
        }
        let mut out = Vec::with_capacity(4);
        for (name, c) in METHODS.iter().zip(curves) {
            let preds = PredictionSet::new(c, times.clone(), events.clone())?;
            out.push(TrialResult {
                seed,
                method: (*name).into(),
                recovered: None,
                selected_vars: vec![],
                leaves: 0,
                ibs: Some(ibs(&preds, &g)?.value),
            });
        }
        Ok(out)
    })?;
    let mut rows = Vec::new();
    for r in results.iter().flatten() {
        rows.push(row(spec, &r.method, r.seed, "ibs", r.ibs.unwrap_or(f64::NAN)));
    }
    if trials > 0 {
        let series = |m: usize| -> Vec<f64> { results.iter().map(|t| t[m].ibs.unwrap_or(f64::NAN)).collect() };
        for (m, name) in METHODS.iter().enumerate() {
            rows.push(row(spec, name, master, "median_ibs", median(series(m))));
        }
        for a in 0..METHODS.len() {
            for b in a + 1..METHODS.len() {
                if let Ok(p) = wilcoxon_signed_rank(&series(a), &series(b)) {
                    let pair = format!("{}:{}", METHODS[a], METHODS[b]);
                    rows.push(row(spec, &pair, master, "signed_rank_p", p));
                }
            }
        }
    }
    Ok(rows)
}

/// Runs one scenario with its own trial count if set, else `trials`.
pub fn run_scenario(
    spec: &ScenarioSpec,
    trials: usize,
    master: u64,
    methods: &Methods,
) -> Result<Vec<ResultRow>, SimError> {
    let trials = spec.trials.unwrap_or(trials);
    match spec.experiment {
        Experiment::Recovery => run_recovery_experiment(spec, trials, master, methods),
        Experiment::Null => run_null_selection_experiment(spec, trials, master, methods),
        Experiment::Ibs => run_ibs_experiment(spec, trials, master, methods),
    }
}

/// Runs every scenario of a grid in file order.
pub fn run_grid(file: &ScenarioFile, methods: &Methods) -> Result<Vec<ResultRow>, SimError> {
    let mut rows = Vec::new();
    for spec in &file.scenarios {
        rows.extend(run_scenario(spec, file.trials, file.seed, methods)?);
    }
    Ok(rows)
}

/// Writes rows as CSV with columns `scenario,method,seed,metric,value`.
pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "method", "seed", "metric", "value"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| DataError::Io {
        path: "<results>".into(),
        source: e,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::scenario::{Family, Setup};

    fn spec(experiment: Experiment) -> ScenarioSpec {
        ScenarioSpec {
            name: "smoke".into(),
            experiment,
            setup: Setup::Tree,
            family: Family::Exponential,
            truncation: 1.0,
            censoring: 0.2,
            n: 60,
            trials: None,
        }
    }

    #[test]
    fn trial_seeds_differ_across_trials_and_scenarios() {
        assert_ne!(trial_seed(1, "a", 0), trial_seed(1, "a", 1));
        assert_ne!(trial_seed(1, "a", 0), trial_seed(1, "b", 0));
        assert_eq!(trial_seed(7, "a", 3), trial_seed(7, "a", 3));
    }

    #[test]
    fn zero_trials_give_empty_table() {
        let rows = run_null_selection_experiment(&spec(Experiment::Null), 0, 1, &Methods::default()).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn one_recovery_trial_has_rows_per_method() {
        let rows = run_recovery_experiment(&spec(Experiment::Recovery), 1, 5, &Methods::default()).unwrap();
        for m in ["ltrcit", "ltrcart"] {
            assert!(rows.iter().any(|r| r.method == m && r.metric == "recovered"));
        }
    }

    #[test]
    fn reruns_are_identical() {
        let a = run_ibs_experiment(&spec(Experiment::Ibs), 2, 3, &Methods::default()).unwrap();
        let b = run_ibs_experiment(&spec(Experiment::Ibs), 2, 3, &Methods::default()).unwrap();
        assert_eq!(a, b);
    }
}
