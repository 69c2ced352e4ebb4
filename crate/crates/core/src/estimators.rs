//! Delayed-entry risk sets, product-limit and Nelson–Aalen estimators, and log-rank scores.
//!
//! A record `(left, right]` is at risk at time `t` when `left < t <= right`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Span};
use crate::error::EstimateError;
use crate::scalar::Scalar;

/// Right-continuous piecewise-constant function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StepFunction<T> {
    initial: T,
    knots: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> StepFunction<T> {
    pub fn new(initial: T, knots: Vec<T>, values: Vec<T>) -> Result<Self, EstimateError> {
        if knots.len() != values.len() {
            return Err(EstimateError::Argument(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(EstimateError::Argument(
                "knots must be finite and strictly increasing".into(),
            ));
        }
        Ok(StepFunction {
            initial,
            knots,
            values,
        })
    }

    pub fn constant(value: T) -> Self {
        StepFunction {
            initial: value,
            knots: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn initial(&self) -> T {
        self.initial
    }
    pub fn knots(&self) -> &[T] {
        &self.knots
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Value at `t`, including a jump located exactly at `t`.
    pub fn eval(&self, t: T) -> T {
        let idx = self.knots.partition_point(|&k| k <= t);
        if idx == 0 {
            self.initial
        } else {
            self.values[idx - 1]
        }
    }

    /// Value just before `t`.
    pub fn left_limit(&self, t: T) -> T {
        let idx = self.knots.partition_point(|&k| k < t);
        if idx == 0 {
            self.initial
        } else {
            self.values[idx - 1]
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> StepFunction<T> {
        StepFunction {
            initial: f(self.initial),
            knots: self.knots.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Survival function estimate: starts at 1, non-increasing, within `[0, 1]`.
///
/// With delayed entry the estimate is conditional on survival to the smallest entry time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(transparent)]
pub struct SurvivalCurve<T>(StepFunction<T>);

impl<T: Scalar> SurvivalCurve<T> {
    pub fn new(knots: Vec<T>, values: Vec<T>) -> Result<Self, EstimateError> {
        let f = StepFunction::new(T::one(), knots, values)?;
        let mut prev = T::one();
        for &v in f.values() {
            if !(v >= T::zero() && v <= prev) {
                return Err(EstimateError::Argument(
                    "survival values must be non-increasing within [0, 1]".into(),
                ));
            }
            prev = v;
        }
        Ok(SurvivalCurve(f))
    }

    pub fn flat() -> Self {
        SurvivalCurve(StepFunction::constant(T::one()))
    }

    /// Product-limit estimate over delayed-entry risk sets.
    pub fn product_limit(spans: &[Span<T>]) -> Self {
        Self::from_table(&RiskSetTable::from_spans(spans))
    }

    pub fn from_table(table: &RiskSetTable<T>) -> Self {
        let mut s = T::one();
        let values = table
            .rows()
            .map(|(_, d, n)| {
                s = s * (T::one() - T::from_count(d) / T::from_count(n));
                s
            })
            .collect();
        SurvivalCurve(StepFunction {
            initial: T::one(),
            knots: table.times.clone(),
            values,
        })
    }

    /// `exp(-theta * H(t))`.
    pub fn from_cumulative_hazard(hazard: &CumulativeHazard<T>, theta: T) -> Self {
        SurvivalCurve(hazard.0.map(|h| (-(theta * h)).exp()))
    }

    pub fn eval(&self, t: T) -> T {
        self.0.eval(t)
    }
    pub fn left_limit(&self, t: T) -> T {
        self.0.left_limit(t)
    }
    pub fn knots(&self) -> &[T] {
        self.0.knots()
    }
    pub fn values(&self) -> &[T] {
        self.0.values()
    }
    pub fn step_function(&self) -> &StepFunction<T> {
        &self.0
    }
}

/// Cumulative hazard estimate: starts at 0, non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(transparent)]
pub struct CumulativeHazard<T>(StepFunction<T>);

impl<T: Scalar> CumulativeHazard<T> {
    pub fn nelson_aalen(spans: &[Span<T>]) -> Self {
        Self::from_table(&RiskSetTable::from_spans(spans))
    }

    pub fn from_table(table: &RiskSetTable<T>) -> Self {
        let mut h = T::zero();
        let values = table
            .rows()
            .map(|(_, d, n)| {
                h = h + T::from_count(d) / T::from_count(n);
                h
            })
            .collect();
        CumulativeHazard(StepFunction {
            initial: T::zero(),
            knots: table.times.clone(),
            values,
        })
    }

    pub fn eval(&self, t: T) -> T {
        self.0.eval(t)
    }
    pub fn knots(&self) -> &[T] {
        self.0.knots()
    }
    pub fn values(&self) -> &[T] {
        self.0.values()
    }
    pub fn step_function(&self) -> &StepFunction<T> {
        &self.0
    }
}

/// Distinct event times with event counts and delayed-entry risk-set sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RiskSetTable<T> {
    times: Vec<T>,
    events: Vec<usize>,
    at_risk: Vec<usize>,
}

fn sort_floats<T: Scalar>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
}

impl<T: Scalar> RiskSetTable<T> {
    /// Empty when no span carries an event.
    pub fn from_spans(spans: &[Span<T>]) -> Self {
        let mut event_times: Vec<T> = spans.iter().filter(|s| s.event).map(|s| s.right).collect();
        sort_floats(&mut event_times);
        let mut times = Vec::new();
        let mut events = Vec::new();
        for t in event_times {
            if times.last() == Some(&t) {
                *events.last_mut().expect("non-empty") += 1;
            } else {
                times.push(t);
                events.push(1);
            }
        }
        let mut lefts: Vec<T> = spans.iter().map(|s| s.left).collect();
        let mut rights: Vec<T> = spans.iter().map(|s| s.right).collect();
        sort_floats(&mut lefts);
        sort_floats(&mut rights);
        let at_risk = times
            .iter()
            .map(|&t| lefts.partition_point(|&l| l < t) - rights.partition_point(|&r| r < t))
            .collect();
        RiskSetTable {
            times,
            events,
            at_risk,
        }
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }
    pub fn events(&self) -> &[usize] {
        &self.events
    }
    pub fn at_risk(&self) -> &[usize] {
        &self.at_risk
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (T, usize, usize)> + '_ {
        self.times
            .iter()
            .zip(&self.events)
            .zip(&self.at_risk)
            .map(|((&t, &d), &n)| (t, d, n))
    }

    /// Sum of `ln(1 - d/n)` over event times in `(from, to]`.
    fn log_factor_sum(&self, from: T, to: T) -> T {
        let lo = self.times.partition_point(|&t| t <= from);
        let hi = self.times.partition_point(|&t| t <= to);
        self.log_factor_range(lo, hi)
    }

    fn log_factor_range(&self, lo: usize, hi: usize) -> T {
        (lo..hi)
            .map(|i| (T::one() - T::from_count(self.events[i]) / T::from_count(self.at_risk[i])).ln())
            .sum()
    }
}

pub fn risk_set_table<T: Scalar>(data: &Dataset<T>) -> RiskSetTable<T> {
    RiskSetTable::from_spans(&data.spans())
}

pub fn km_ltrc<T: Scalar>(data: &Dataset<T>) -> SurvivalCurve<T> {
    SurvivalCurve::product_limit(&data.spans())
}

pub fn nelson_aalen_ltrc<T: Scalar>(data: &Dataset<T>) -> CumulativeHazard<T> {
    CumulativeHazard::nelson_aalen(&data.spans())
}

/// Exact score for an event where the survival estimate drops from `a` to `b`.
fn peto_drop<T: Scalar>(a: T, b: T) -> T {
    (a.xlogx() - b.xlogx()) / (a - b)
}

fn undefined(spans_index: usize, reason: &str) -> EstimateError {
    EstimateError::UndefinedScore {
        index: spans_index,
        subject: format!("#{spans_index}"),
        reason: reason.to_string(),
    }
}

/// Log-rank scores of right-censored spans sharing a common entry time: an event at a drop
/// `a -> b` scores `(a ln a - b ln b)/(a - b)`, a censored span scores `ln S(right)`.
pub fn peto_scores<T: Scalar>(spans: &[Span<T>]) -> Result<Vec<T>, EstimateError> {
    if let Some(first) = spans.first() {
        if spans.iter().any(|s| s.left != first.left) {
            return Err(EstimateError::Argument(
                "right-censored scores need a common entry time".into(),
            ));
        }
    }
    let curve = SurvivalCurve::product_limit(spans);
    spans
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let b = curve.eval(s.right);
            if s.event {
                Ok(peto_drop(curve.left_limit(s.right), b))
            } else if b > T::zero() {
                Ok(b.ln())
            } else {
                Err(undefined(i, "survival estimate is zero at the censoring time"))
            }
        })
        .collect()
}

/// Log-rank scores for delayed-entry data.
///
/// Events score `(a ln a - b ln b)/(a - b) - ln S(left)` with `a = S(right-)`,
/// `b = S(right)`; censored spans score `ln S(right) - ln S(left)`. When the product-limit
/// estimate has already reached zero at `left` (the risk set emptied before this span
/// entered), the same quantities are evaluated on the estimate conditional on survival to
/// `left`, which is what the score depends on.
pub fn logrank_scores<T: Scalar>(spans: &[Span<T>]) -> Result<Vec<T>, EstimateError> {
    let table = RiskSetTable::from_spans(spans);
    let curve = SurvivalCurve::from_table(&table);
    spans
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let s_left = curve.eval(s.left);
            let score = if s_left > T::zero() {
                if s.event {
                    peto_drop(curve.left_limit(s.right), curve.eval(s.right)) - s_left.ln()
                } else {
                    let s_right = curve.eval(s.right);
                    if s_right <= T::zero() {
                        return Err(undefined(i, "survival estimate is zero at the exit time"));
                    }
                    s_right.ln() - s_left.ln()
                }
            } else if s.event {
                let lo = table.times.partition_point(|&t| t <= s.left);
                let idx = table.times.partition_point(|&t| t < s.right);
                let a = table.log_factor_range(lo, idx).exp();
                let factor = T::one()
                    - T::from_count(table.events[idx]) / T::from_count(table.at_risk[idx]);
                peto_drop(a, a * factor)
            } else {
                table.log_factor_sum(s.left, s.right)
            };
            if score.is_finite() {
                Ok(score)
            } else {
                Err(undefined(i, "non-finite score"))
            }
        })
        .collect()
}

pub fn peto_scores_rc<T: Scalar>(data: &Dataset<T>) -> Result<Vec<T>, EstimateError> {
    peto_scores(&data.spans()).map_err(|e| name_record(e, data))
}

pub fn logrank_scores_ltrc<T: Scalar>(data: &Dataset<T>) -> Result<Vec<T>, EstimateError> {
    logrank_scores(&data.spans()).map_err(|e| name_record(e, data))
}

fn name_record<T: Scalar>(e: EstimateError, data: &Dataset<T>) -> EstimateError {
    match e {
        EstimateError::UndefinedScore { index, reason, .. } => EstimateError::UndefinedScore {
            index,
            subject: data.records()[index].subject_id().to_string(),
            reason,
        },
        other => other,
    }
}
