//! Prediction metrics: IPCW Brier score, integrated Brier score, tree-structure recovery and
//! the paired signed-rank test.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::Span;
use crate::error::EvalError;
use crate::estimators::SurvivalCurve;
use crate::scalar::Scalar;
use crate::stats::ln_normal_two_sided;
use crate::tree::Tree;

/// Predicted curves paired with observed outcomes `(Y, δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet<T> {
    curves: Vec<SurvivalCurve<T>>,
    times: Vec<T>,
    events: Vec<bool>,
}

impl<T: Scalar> PredictionSet<T> {
    pub fn new(
        curves: Vec<SurvivalCurve<T>>,
        times: Vec<T>,
        events: Vec<bool>,
    ) -> Result<Self, EvalError> {
        if curves.len() != times.len() || times.len() != events.len() {
            return Err(EvalError::Argument(format!(
                "{} curves, {} times and {} event flags",
                curves.len(),
                times.len(),
                events.len()
            )));
        }
        if curves.is_empty() {
            return Err(EvalError::Argument("empty prediction set".into()));
        }
        if times.iter().any(|t| !t.is_finite() || *t < T::zero()) {
            return Err(EvalError::Argument("observed times must be finite and non-negative".into()));
        }
        Ok(PredictionSet {
            curves,
            times,
            events,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_time(&self) -> T {
        self.times.iter().copied().fold(T::zero(), T::max)
    }
}

/// Product-limit estimate of the censoring distribution: event and censoring roles are
/// swapped and entry times ignored.
pub fn censoring_km<T: Scalar>(times: &[T], events: &[bool]) -> SurvivalCurve<T> {
    let spans: Vec<Span<T>> = times
        .iter()
        .zip(events)
        .map(|(&t, &e)| Span::new(T::zero(), t, !e))
        .collect();
    SurvivalCurve::product_limit(&spans)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrierScore {
    pub value: f64,
    /// Record evaluations dropped because a censoring weight was zero.
    pub excluded: usize,
}

/// Inverse-probability-of-censoring weighted Brier score at `t`.
///
/// Records with an event by `t` contribute `S(t)^2 / G(Y-)`, records still at risk
/// contribute `(1 - S(t))^2 / G(t)`, and records censored by `t` contribute 0. The sum is
/// divided by the number of records.
pub fn brier_at_t<T: Scalar>(t: T, preds: &PredictionSet<T>, g: &SurvivalCurve<T>) -> BrierScore {
    let g_t = g.eval(t).as_f64();
    let mut total = 0.0;
    let mut excluded = 0;
    for i in 0..preds.len() {
        let y = preds.times[i];
        let s = preds.curves[i].eval(t).as_f64();
        if y <= t && preds.events[i] {
            let w = g.left_limit(y).as_f64();
            if w > 0.0 {
                total += s * s / w;
            } else {
                excluded += 1;
            }
        } else if y > t {
            if g_t > 0.0 {
                total += (1.0 - s) * (1.0 - s) / g_t;
            } else {
                excluded += 1;
            }
        }
    }
    BrierScore {
        value: total / preds.len() as f64,
        excluded,
    }
}

/// `(1/max Y) ∫_0^{max Y} BS(t) dt`, integrated exactly over the merged breakpoints of the
/// predicted curves, the censoring curve and the observed times.
pub fn ibs<T: Scalar>(preds: &PredictionSet<T>, g: &SurvivalCurve<T>) -> Result<BrierScore, EvalError> {
    let horizon = preds.max_time();
    if !(horizon > T::zero()) {
        return Err(EvalError::Argument("largest observed time must be positive".into()));
    }
    let h = horizon.as_f64();
    let mut cuts: Vec<f64> = preds
        .curves
        .iter()
        .flat_map(|c| c.knots().iter())
        .chain(g.knots())
        .chain(&preds.times)
        .map(|t| t.as_f64())
        .filter(|&t| t > 0.0 && t < h)
        .collect();
    cuts.push(0.0);
    cuts.push(h);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // summation by parts: ∫ BS = BS_last * h - Σ_k b_k (BS_k - BS_{k-1}), which is exact
    // whenever the score is constant
    let mut correction = 0.0;
    let mut excluded = 0;
    let mut prev: Option<f64> = None;
    for &b in &cuts[..cuts.len() - 1] {
        let bs = brier_at_t(T::lit(b), preds, g);
        excluded += bs.excluded;
        if let Some(p) = prev {
            correction += b * (bs.value - p);
        }
        prev = Some(bs.value);
    }
    let last = prev.expect("at least one interval");
    Ok(BrierScore {
        value: last - correction / h,
        excluded,
    })
}

/// One condition of a ground-truth leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum Condition<T> {
    Le(usize, T),
    Gt(usize, T),
    In(usize, Vec<T>),
}

impl<T: Scalar> Condition<T> {
    fn covariate(&self) -> usize {
        match self {
            Condition::Le(j, _) | Condition::Gt(j, _) | Condition::In(j, _) => *j,
        }
    }

    fn holds(&self, row: &[T]) -> bool {
        match self {
            Condition::Le(j, c) => row[*j] <= *c,
            Condition::Gt(j, c) => row[*j] > *c,
            Condition::In(j, set) => set.contains(&row[*j]),
        }
    }
}

/// Support of one covariate, used to probe partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum Domain<T> {
    Discrete(Vec<T>),
    Continuous { lo: T, hi: T },
}

/// Target partition: each leaf is a conjunction of conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TruthPartition<T> {
    pub leaves: Vec<Vec<Condition<T>>>,
    pub domains: Vec<Domain<T>>,
    /// Width, as a fraction of a continuous domain, of the band around each true cut inside
    /// which fitted cuts may deviate.
    pub tolerance: f64,
}

const GRID_POINTS: usize = 101;

impl<T: Scalar> TruthPartition<T> {
    pub fn leaf_of(&self, row: &[T]) -> Option<usize> {
        self.leaves
            .iter()
            .position(|conds| conds.iter().all(|c| c.holds(row)))
    }

    pub fn covariates(&self) -> BTreeSet<usize> {
        self.leaves.iter().flatten().map(Condition::covariate).collect()
    }

    fn probes(&self, j: usize) -> Vec<T> {
        match &self.domains[j] {
            Domain::Discrete(values) => values.clone(),
            Domain::Continuous { lo, hi } => {
                let (lo, hi) = (lo.as_f64(), hi.as_f64());
                let band = self.tolerance * (hi - lo);
                let cuts: Vec<f64> = self
                    .leaves
                    .iter()
                    .flatten()
                    .filter_map(|c| match c {
                        Condition::Le(k, v) | Condition::Gt(k, v) if *k == j => Some(v.as_f64()),
                        _ => None,
                    })
                    .collect();
                (0..GRID_POINTS)
                    .map(|k| lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64)
                    .filter(|x| cuts.iter().all(|c| (x - c).abs() > band))
                    .map(T::lit)
                    .collect()
            }
        }
    }
}

/// Whether the fitted tree partitions covariate space exactly as `truth` does: same leaf
/// count and a one-to-one correspondence of leaves over a probe grid of every covariate
/// either uses. Continuous probes avoid a band around true cuts, so fitted cuts close to a
/// true cut still count. Split order does not matter.
pub fn structure_recovered<T: Scalar, P: Clone>(fitted: &Tree<T, P>, truth: &TruthPartition<T>) -> bool {
    if fitted.leaf_count() != truth.leaves.len() {
        return false;
    }
    let used: Vec<usize> = fitted
        .used_covariates()
        .union(&truth.covariates())
        .copied()
        .collect();
    let mut row: Vec<T> = truth
        .domains
        .iter()
        .map(|d| match d {
            Domain::Discrete(v) => v[0],
            Domain::Continuous { lo, .. } => *lo,
        })
        .collect();
    let grids: Vec<Vec<T>> = used.iter().map(|&j| truth.probes(j)).collect();
    let mut pairing: HashMap<usize, usize> = HashMap::new();
    let mut reverse: HashMap<usize, usize> = HashMap::new();
    let mut idx = vec![0usize; used.len()];
    if grids.iter().any(|g| g.is_empty()) {
        return false;
    }
    loop {
        for (k, &j) in used.iter().enumerate() {
            row[j] = grids[k][idx[k]];
        }
        if let Some(t) = truth.leaf_of(&row) {
            let Ok(f) = fitted.route(&row) else {
                return false;
            };
            if *pairing.entry(t).or_insert(f) != f || *reverse.entry(f).or_insert(t) != t {
                return false;
            }
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == idx.len() {
                return pairing.len() == truth.leaves.len();
            }
            idx[k] += 1;
            if idx[k] < grids[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Two-sided p-value of the Wilcoxon signed-rank test on paired samples, using the normal
/// approximation with zero differences dropped, mid-ranks for ties, the tie correction of
/// the variance and a continuity correction. All-zero differences give 1.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Argument(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 6 {
        return Err(EvalError::Argument("signed-rank test needs at least 6 pairs".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(EvalError::Argument("paired samples must be finite".into()));
    }
    let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Ok(1.0);
    }
    d.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let n = d.len();
    let mut w_plus = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        w_plus += rank * d[i..=j].iter().filter(|v| **v > 0.0).count() as f64;
        i = j + 1;
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(ln_normal_two_sided(z).exp())
}
