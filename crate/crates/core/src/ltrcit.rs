//! Conditional-inference survival tree for left-truncated, right-censored data.
//!
//! Each node recomputes log-rank scores from its own records, tests every covariate for
//! association with the scores under the permutation null, stops when the smallest
//! Bonferroni-adjusted p-value exceeds `alpha`, and otherwise splits the selected covariate
//! at the cut that best separates the scores. Leaves carry the product-limit curve of their
//! records.

use serde::{Deserialize, Serialize};

use crate::data::{CovariateKind, CovariateSchema, Dataset, Span};
use crate::error::TreeError;
use crate::estimators::{logrank_scores, SurvivalCurve};
use crate::scalar::Scalar;
use crate::stats::{ln_chi_square_sf, ln_normal_two_sided};
use crate::tree::{Split, SplitRule, Tree};

/// Exhaustive subset search is used up to this many levels present at a node.
pub const EXHAUSTIVE_LEVELS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtreeControls {
    pub alpha: f64,
    pub min_split: usize,
    pub min_bucket: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
}

impl Default for CtreeControls {
    fn default() -> Self {
        CtreeControls {
            alpha: 0.05,
            min_split: 20,
            min_bucket: 7,
            max_depth: 0,
        }
    }
}

impl CtreeControls {
    pub fn validate(&self) -> Result<(), TreeError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(TreeError::Controls(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.min_bucket < 1 {
            return Err(TreeError::Controls("min_bucket must be at least 1".into()));
        }
        if self.min_split < 2 * self.min_bucket {
            return Err(TreeError::Controls(format!(
                "min_split ({}) must be at least twice min_bucket ({})",
                self.min_split, self.min_bucket
            )));
        }
        Ok(())
    }
}

/// Result of testing one covariate against the node scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationTest {
    /// Linear statistic: `sum g(x) u` for numeric and ordinal covariates, per-level score
    /// sums for nominal ones.
    pub linear: Vec<f64>,
    /// Standardized statistic: `z` for numeric and ordinal, the quadratic form otherwise.
    pub statistic: f64,
    pub df: usize,
    /// Natural log of the asymptotic p-value.
    pub ln_p: f64,
}

impl AssociationTest {
    fn uninformative(linear: Vec<f64>) -> Self {
        AssociationTest {
            linear,
            statistic: 0.0,
            df: 0,
            ln_p: 0.0,
        }
    }

    pub fn p_value(&self) -> f64 {
        self.ln_p.exp()
    }
}

fn score_moments(u: &[f64]) -> (f64, f64) {
    let n = u.len() as f64;
    let mean = u.iter().sum::<f64>() / n;
    let var = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn degenerate_variance(var: f64, mean: f64) -> bool {
    var <= 1e-14 * (1.0 + mean * mean)
}

/// Permutation test of association between covariate values `x` and scores `u`.
///
/// Numeric and ordinal covariates use the standardized linear statistic with a two-sided
/// normal p-value; nominal covariates use the quadratic form over the levels present, with
/// a chi-square p-value on (levels present - 1) degrees of freedom. Constant covariates and
/// constant scores give `p = 1`.
pub fn association_test<T: Scalar>(x: &[T], u: &[T], kind: &CovariateKind) -> AssociationTest {
    let xs: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
    let us: Vec<f64> = u.iter().map(|v| v.as_f64()).collect();
    let n = us.len();
    if n < 2 {
        return AssociationTest::uninformative(vec![0.0]);
    }
    let nf = n as f64;
    let (u_mean, u_var) = score_moments(&us);
    match kind {
        CovariateKind::Numeric | CovariateKind::Ordinal { .. } => {
            let linear = xs.iter().zip(&us).map(|(g, v)| g * v).sum::<f64>();
            let g_mean = xs.iter().sum::<f64>() / nf;
            let sgg = xs.iter().map(|g| (g - g_mean).powi(2)).sum::<f64>();
            let distinct = xs.iter().any(|&g| g != xs[0]);
            if !distinct || degenerate_variance(u_var, u_mean) || sgg <= 0.0 {
                return AssociationTest::uninformative(vec![linear]);
            }
            let centered = xs
                .iter()
                .zip(&us)
                .map(|(g, v)| (g - g_mean) * (v - u_mean))
                .sum::<f64>();
            let sigma = (u_var * sgg * nf / (nf - 1.0)).sqrt();
            let z = centered / sigma;
            AssociationTest {
                linear: vec![linear],
                statistic: z,
                df: 1,
                ln_p: ln_normal_two_sided(z),
            }
        }
        CovariateKind::Nominal { levels } => {
            let mut sums = vec![0.0; levels.len()];
            let mut counts = vec![0usize; levels.len()];
            for (g, v) in xs.iter().zip(&us) {
                let k = *g as usize;
                sums[k] += v;
                counts[k] += 1;
            }
            let present = counts.iter().filter(|&&c| c > 0).count();
            if present < 2 || degenerate_variance(u_var, u_mean) {
                return AssociationTest::uninformative(sums);
            }
            let quad = sums
                .iter()
                .zip(&counts)
                .filter(|(_, &c)| c > 0)
                .map(|(s, &c)| (s - c as f64 * u_mean).powi(2) / c as f64)
                .sum::<f64>()
                * (nf - 1.0)
                / (nf * u_var);
            let df = present - 1;
            AssociationTest {
                linear: sums,
                statistic: quad,
                df,
                ln_p: ln_chi_square_sf(quad, df as f64),
            }
        }
    }
}

/// Node scores: log-rank scores recomputed on the node's own records.
pub fn node_influence<T: Scalar>(spans: &[Span<T>]) -> Result<Vec<T>, TreeError> {
    Ok(logrank_scores(spans)?)
}

/// Outcome of variable selection at a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Covariate with the smallest p-value (lowest index on ties).
    pub covariate: usize,
    /// Natural log of its Bonferroni-adjusted p-value.
    pub ln_p_adjusted: f64,
    pub tests: Vec<AssociationTest>,
}

impl Selection {
    pub fn p_adjusted(&self) -> f64 {
        self.ln_p_adjusted.exp()
    }

    /// Whether the multiplicity-adjusted test rejects at `alpha`.
    pub fn significant(&self, alpha: f64) -> bool {
        self.ln_p_adjusted <= alpha.ln()
    }
}

/// Tests every covariate; `columns` are column-major values restricted to the node.
pub fn select_split_variable<T: Scalar>(
    schema: &CovariateSchema,
    columns: &[Vec<T>],
    scores: &[T],
) -> Selection {
    let tests: Vec<AssociationTest> = schema
        .columns()
        .iter()
        .zip(columns)
        .map(|(col, x)| association_test(x, scores, &col.kind))
        .collect();
    let mut best = 0;
    for (j, t) in tests.iter().enumerate() {
        if t.ln_p < tests[best].ln_p {
            best = j;
        }
    }
    let m = tests.len() as f64;
    let ln_p_adjusted = (m.ln() + tests[best].ln_p).min(0.0);
    Selection {
        covariate: best,
        ln_p_adjusted,
        tests,
    }
}

fn two_sample_stat(sum_left: f64, n_left: usize, n: usize, u_mean: f64, u_var: f64) -> f64 {
    let nl = n_left as f64;
    let nr = (n - n_left) as f64;
    let denom = (u_var * nl * nr / (n as f64 - 1.0)).sqrt();
    (sum_left - nl * u_mean).abs() / denom
}

/// Best binary split of the node on one covariate, maximizing the absolute standardized
/// two-sample statistic of the scores. `None` when no cut leaves `min_bucket` records on
/// both sides or the scores are constant.
pub fn best_binary_split<T: Scalar>(
    x: &[T],
    u: &[T],
    covariate: usize,
    kind: &CovariateKind,
    min_bucket: usize,
) -> Option<(SplitRule<T>, f64)> {
    let n = x.len();
    if n < 2 * min_bucket.max(1) {
        return None;
    }
    let us: Vec<f64> = u.iter().map(|v| v.as_f64()).collect();
    let (u_mean, u_var) = score_moments(&us);
    if degenerate_variance(u_var, u_mean) {
        return None;
    }
    match kind {
        CovariateKind::Numeric | CovariateKind::Ordinal { .. } => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite covariates"));
            let mut best: Option<(T, f64)> = None;
            let mut sum_left = 0.0;
            for k in 0..n - 1 {
                sum_left += us[order[k]];
                let (lo, hi) = (x[order[k]], x[order[k + 1]]);
                let n_left = k + 1;
                if lo == hi || n_left < min_bucket || n - n_left < min_bucket {
                    continue;
                }
                let stat = two_sample_stat(sum_left, n_left, n, u_mean, u_var);
                if best.is_none_or(|(_, s)| stat > s) {
                    let mid = lo + (hi - lo) / T::lit(2.0);
                    let cut = if mid < hi { mid } else { lo };
                    best = Some((cut, stat));
                }
            }
            best.map(|(cut, stat)| (SplitRule::Threshold { covariate, cut }, stat))
        }
        CovariateKind::Nominal { levels } => {
            let mut sums = vec![0.0; levels.len()];
            let mut counts = vec![0usize; levels.len()];
            for (g, v) in x.iter().zip(&us) {
                let k = g.as_f64() as usize;
                sums[k] += v;
                counts[k] += 1;
            }
            let present: Vec<usize> = (0..levels.len()).filter(|&k| counts[k] > 0).collect();
            if present.len() < 2 {
                return None;
            }
            let candidates: Vec<Vec<usize>> = if present.len() <= EXHAUSTIVE_LEVELS {
                // the last present level always goes right, so each bipartition appears once
                let k = present.len();
                (1u32..(1 << (k - 1)))
                    .map(|mask| {
                        (0..k - 1)
                            .filter(|b| mask & (1 << b) != 0)
                            .map(|b| present[b])
                            .collect()
                    })
                    .collect()
            } else {
                let mut ordered = present.clone();
                ordered.sort_by(|&a, &b| {
                    let ma = sums[a] / counts[a] as f64;
                    let mb = sums[b] / counts[b] as f64;
                    ma.total_cmp(&mb).then(a.cmp(&b))
                });
                (1..ordered.len()).map(|k| ordered[..k].to_vec()).collect()
            };
            let mut best: Option<(Vec<usize>, f64)> = None;
            for mut left in candidates {
                let n_left: usize = left.iter().map(|&k| counts[k]).sum();
                if n_left < min_bucket || n - n_left < min_bucket {
                    continue;
                }
                let sum_left: f64 = left.iter().map(|&k| sums[k]).sum();
                let stat = two_sample_stat(sum_left, n_left, n, u_mean, u_var);
                if best.as_ref().is_none_or(|(_, s)| stat > *s) {
                    left.sort_unstable();
                    best = Some((left, stat));
                }
            }
            best.map(|(left, stat)| {
                let right = present.iter().copied().filter(|k| !left.contains(k)).collect();
                (
                    SplitRule::Subset {
                        covariate,
                        left,
                        right,
                    },
                    stat,
                )
            })
        }
    }
}

/// Test that selected a node's split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTest {
    pub covariate: usize,
    #[serde(with = "crate::float_serde")]
    pub statistic: f64,
    pub p_value: f64,
    #[serde(with = "crate::float_serde")]
    pub ln_p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CtreeNode<T> {
    pub events: usize,
    pub curve: SurvivalCurve<T>,
    pub test: Option<NodeTest>,
}

/// Fitted conditional-inference tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LtrcitModel<T> {
    pub controls: CtreeControls,
    pub tree: Tree<T, CtreeNode<T>>,
}

impl<T: Scalar> LtrcitModel<T> {
    /// Product-limit curve of the leaf the row falls into.
    pub fn predict(&self, row: &[T]) -> Result<&SurvivalCurve<T>, TreeError> {
        let leaf = self.tree.route(row)?;
        Ok(&self.tree.node(leaf).payload.curve)
    }

    pub fn summary(&self) -> String {
        self.tree.outline(|node| {
            let c = &node.payload.curve;
            format!(
                "events={} S(end)={:.4}",
                node.payload.events,
                c.values().last().map_or(1.0, |v| v.as_f64())
            )
        })
    }

    pub fn to_dot(&self) -> String {
        self.tree.to_dot(|node| match &node.payload.test {
            Some(t) => format!(
                "{}\\np = {:.3e}\\nn = {}",
                self.tree.schema().column(t.covariate).name,
                t.ln_p_adjusted.exp(),
                node.members.len()
            ),
            None => format!("n = {}\\nevents = {}", node.members.len(), node.payload.events),
        })
    }
}

fn check_fit_data<T: Scalar>(data: &Dataset<T>) -> Result<(), TreeError> {
    if data.is_empty() {
        return Err(TreeError::Data("dataset is empty".into()));
    }
    if data.event_count() == 0 {
        return Err(TreeError::Data("dataset has no events".into()));
    }
    Ok(())
}

/// Association tests at the root for every covariate, with scores from the full data.
pub fn root_tests<T: Scalar>(data: &Dataset<T>) -> Result<Selection, TreeError> {
    check_fit_data(data)?;
    let scores = node_influence(&data.spans())?;
    Ok(select_split_variable(data.schema(), &data.columns(), &scores))
}

pub fn fit_ltrcit<T: Scalar>(
    data: &Dataset<T>,
    controls: &CtreeControls,
) -> Result<LtrcitModel<T>, TreeError> {
    controls.validate()?;
    check_fit_data(data)?;
    let spans = data.spans();
    let columns = data.columns();
    let mut tree = Tree::new(data.schema().clone());
    let ctx = Grower {
        schema: data.schema(),
        spans: &spans,
        columns: &columns,
        controls,
    };
    ctx.grow(&mut tree, None, (0..data.len()).collect())?;
    Ok(LtrcitModel {
        controls: *controls,
        tree,
    })
}

struct Grower<'a, T> {
    schema: &'a CovariateSchema,
    spans: &'a [Span<T>],
    columns: &'a [Vec<T>],
    controls: &'a CtreeControls,
}

impl<T: Scalar> Grower<'_, T> {
    fn grow(
        &self,
        tree: &mut Tree<T, CtreeNode<T>>,
        parent: Option<usize>,
        members: Vec<usize>,
    ) -> Result<usize, TreeError> {
        let spans: Vec<Span<T>> = members.iter().map(|&i| self.spans[i]).collect();
        let events = spans.iter().filter(|s| s.event).count();
        let curve = SurvivalCurve::product_limit(&spans);
        let id = tree.push(
            parent,
            members.clone(),
            CtreeNode {
                events,
                curve,
                test: None,
            },
        );
        let depth = tree.node(id).depth;
        if members.len() < self.controls.min_split
            || events == 0
            || (self.controls.max_depth > 0 && depth >= self.controls.max_depth)
        {
            return Ok(id);
        }
        let scores = node_influence(&spans)?;
        let cols: Vec<Vec<T>> = self
            .columns
            .iter()
            .map(|c| members.iter().map(|&i| c[i]).collect())
            .collect();
        let selection = select_split_variable(self.schema, &cols, &scores);
        if !selection.significant(self.controls.alpha) {
            return Ok(id);
        }
        let j = selection.covariate;
        let Some((rule, _)) = best_binary_split(
            &cols[j],
            &scores,
            j,
            &self.schema.column(j).kind,
            self.controls.min_bucket,
        ) else {
            return Ok(id);
        };
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (k, &i) in members.iter().enumerate() {
            let row: Vec<T> = cols.iter().map(|c| c[k]).collect();
            if rule.goes_left(&row, self.schema)? {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        let chosen = &selection.tests[j];
        tree.node_mut(id).payload.test = Some(NodeTest {
            covariate: j,
            statistic: chosen.statistic,
            p_value: chosen.p_value(),
            ln_p_adjusted: selection.ln_p_adjusted,
        });
        let l = self.grow(tree, Some(id), left)?;
        let r = self.grow(tree, Some(id), right)?;
        tree.set_split(id, Split { rule, left: l, right: r });
        Ok(id)
    }
}
