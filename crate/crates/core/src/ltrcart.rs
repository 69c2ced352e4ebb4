//! Relative-risk survival tree for left-truncated, right-censored data.
//!
//! The baseline cumulative hazard is estimated once on the full data with Nelson–Aalen;
//! each record then contributes an exposure `Λ(R) - Λ(L)` and an event count `δ`, and the
//! tree is an ordinary Poisson regression tree on those pairs. Growth maximizes the
//! deviance reduction, pruning follows the weakest-link cost-complexity sequence, and the
//! subtree is chosen by cross-validated Poisson deviance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CovariateKind, CovariateSchema, Dataset, Span};
use crate::error::TreeError;
use crate::estimators::{CumulativeHazard, SurvivalCurve};
use crate::scalar::Scalar;
use crate::tree::{Node, Split, SplitRule, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartControls {
    pub min_split: usize,
    pub min_bucket: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub cv_folds: usize,
    /// Multiplier of the standard error in subtree selection; 0 picks the minimizer.
    pub se_rule: f64,
    /// A split is grown only if it reduces deviance by more than `cp_min` times the root
    /// deviance.
    pub cp_min: f64,
}

impl Default for CartControls {
    fn default() -> Self {
        CartControls {
            min_split: 20,
            min_bucket: 7,
            max_depth: 0,
            cv_folds: 10,
            se_rule: 0.0,
            cp_min: 0.001,
        }
    }
}

impl CartControls {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.min_bucket < 1 {
            return Err(TreeError::Controls("min_bucket must be at least 1".into()));
        }
        if self.min_split < 2 * self.min_bucket {
            return Err(TreeError::Controls(format!(
                "min_split ({}) must be at least twice min_bucket ({})",
                self.min_split, self.min_bucket
            )));
        }
        if self.cv_folds < 2 {
            return Err(TreeError::Controls("cv_folds must be at least 2".into()));
        }
        if !(self.se_rule >= 0.0) || !self.se_rule.is_finite() {
            return Err(TreeError::Controls("se_rule must be non-negative".into()));
        }
        if !(self.cp_min >= 0.0) || !self.cp_min.is_finite() {
            return Err(TreeError::Controls("cp_min must be non-negative".into()));
        }
        Ok(())
    }
}

/// `e_i = Λ(R_i) - Λ(L_i)` for every span.
pub fn exposures<T: Scalar>(spans: &[Span<T>], lambda0: &CumulativeHazard<T>) -> Vec<T> {
    spans
        .iter()
        .map(|s| lambda0.eval(s.right) - lambda0.eval(s.left))
        .collect()
}

/// Poisson deviance term `2[c ln(c/(t θ)) - (c - t θ)]`, with `c ln(c/·) = 0` at `c = 0`.
/// Infinite when `c > 0` and `t θ = 0`.
pub fn poisson_deviance_term<T: Scalar>(count: T, time: T, rate: T) -> T {
    let mu = time * rate;
    let log_part = if count == T::zero() {
        T::zero()
    } else if mu == T::zero() {
        return T::infinity();
    } else {
        count * (count / mu).ln()
    };
    T::lit(2.0) * (log_part - (count - mu))
}

/// Deviance contribution of one record with event flag `event`, exposure `e` and node
/// relative risk `theta`.
pub fn deviance_contribution<T: Scalar>(event: bool, e: T, theta: T) -> T {
    poisson_deviance_term(if event { T::one() } else { T::zero() }, e, theta)
}

/// Deviance of a Poisson node with counts `c_i`, times `t_i` and rate `rate`.
pub fn poisson_node_deviance<T: Scalar>(counts: &[T], times: &[T], rate: T) -> T {
    counts
        .iter()
        .zip(times)
        .map(|(&c, &t)| poisson_deviance_term(c, t, rate))
        .sum()
}

/// Events, exposure, relative risk and deviance of a set of records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NodeStats<T> {
    pub events: usize,
    pub exposure: T,
    pub theta: T,
    pub deviance: T,
}

impl<T: Scalar> NodeStats<T> {
    /// `theta = events / exposure`, or 0 when the exposure is 0.
    pub fn compute(events: &[bool], exposures: &[T]) -> Self {
        let d = events.iter().filter(|&&e| e).count();
        let e: T = exposures.iter().copied().sum();
        let theta = if e > T::zero() {
            T::from_count(d) / e
        } else {
            T::zero()
        };
        let deviance = events
            .iter()
            .zip(exposures)
            .map(|(&ev, &x)| deviance_contribution(ev, x, theta))
            .sum();
        NodeStats {
            events: d,
            exposure: e,
            theta,
            deviance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RiskNode<T> {
    pub stats: NodeStats<T>,
    /// Complexity at which this node is collapsed into a leaf by weakest-link pruning;
    /// infinite for leaves of the grown tree.
    #[serde(with = "crate::float_serde")]
    pub collapse_alpha: f64,
}

/// Deviance reduction of splitting `(d, e)` into `(dl, el)` and the remainder:
/// `2[D_L ln θ_L + D_R ln θ_R - D ln θ]`.
fn reduction(dl: usize, el: f64, d: usize, e: f64) -> f64 {
    let term = |d: usize, e: f64| {
        if d == 0 {
            0.0
        } else {
            d as f64 * (d as f64 / e).ln()
        }
    };
    2.0 * (term(dl, el) + term(d - dl, e - el) - term(d, e))
}

/// Largest deviance reduction for one covariate, with its rule. Ties keep the smaller cut.
pub fn best_poisson_split<T: Scalar>(
    x: &[T],
    events: &[bool],
    exposures: &[T],
    covariate: usize,
    kind: &CovariateKind,
    min_bucket: usize,
) -> Option<(SplitRule<T>, f64)> {
    let n = x.len();
    if n < 2 * min_bucket.max(1) {
        return None;
    }
    let d: usize = events.iter().filter(|&&e| e).count();
    let e: f64 = exposures.iter().map(|v| v.as_f64()).sum();
    if d == 0 {
        return None;
    }
    match kind {
        CovariateKind::Numeric | CovariateKind::Ordinal { .. } => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite covariates"));
            let mut best: Option<(T, f64)> = None;
            let (mut dl, mut el) = (0usize, 0.0f64);
            for k in 0..n - 1 {
                let i = order[k];
                dl += usize::from(events[i]);
                el += exposures[i].as_f64();
                let (lo, hi) = (x[i], x[order[k + 1]]);
                let n_left = k + 1;
                if lo == hi || n_left < min_bucket || n - n_left < min_bucket {
                    continue;
                }
                let r = reduction(dl, el, d, e);
                if r.is_finite() && best.is_none_or(|(_, s)| r > s) {
                    let mid = lo + (hi - lo) / T::lit(2.0);
                    best = Some((if mid < hi { mid } else { lo }, r));
                }
            }
            best.map(|(cut, r)| (SplitRule::Threshold { covariate, cut }, r))
        }
        CovariateKind::Nominal { levels } => {
            let k = levels.len();
            let mut ld = vec![0usize; k];
            let mut le = vec![0.0f64; k];
            let mut ln = vec![0usize; k];
            for i in 0..n {
                let g = x[i].as_f64() as usize;
                ld[g] += usize::from(events[i]);
                le[g] += exposures[i].as_f64();
                ln[g] += 1;
            }
            let rate = |g: usize| if le[g] > 0.0 { ld[g] as f64 / le[g] } else { 0.0 };
            let mut present: Vec<usize> = (0..k).filter(|&g| ln[g] > 0).collect();
            if present.len() < 2 {
                return None;
            }
            present.sort_by(|&a, &b| rate(a).total_cmp(&rate(b)).then(a.cmp(&b)));
            let mut best: Option<(usize, f64)> = None;
            let (mut dl, mut el, mut nl) = (0usize, 0.0f64, 0usize);
            for (pos, &g) in present[..present.len() - 1].iter().enumerate() {
                dl += ld[g];
                el += le[g];
                nl += ln[g];
                if nl < min_bucket || n - nl < min_bucket {
                    continue;
                }
                let r = reduction(dl, el, d, e);
                if r.is_finite() && best.is_none_or(|(_, s)| r > s) {
                    best = Some((pos + 1, r));
                }
            }
            best.map(|(m, r)| {
                let mut left = present[..m].to_vec();
                let mut right = present[m..].to_vec();
                left.sort_unstable();
                right.sort_unstable();
                (
                    SplitRule::Subset {
                        covariate,
                        left,
                        right,
                    },
                    r,
                )
            })
        }
    }
}

/// Best split over all covariates: `(covariate, rule, reduction)`, ties to the lower index.
fn best_split_any<T: Scalar>(
    schema: &CovariateSchema,
    columns: &[Vec<T>],
    events: &[bool],
    exposures: &[T],
    min_bucket: usize,
) -> Option<(SplitRule<T>, f64)> {
    let mut best: Option<(SplitRule<T>, f64)> = None;
    for (j, col) in schema.columns().iter().enumerate() {
        if let Some((rule, r)) =
            best_poisson_split(&columns[j], events, exposures, j, &col.kind, min_bucket)
        {
            if best.as_ref().is_none_or(|(_, s)| r > *s) {
                best = Some((rule, r));
            }
        }
    }
    best
}

/// Largest reduction attainable per covariate at the root, ignoring the growth gate.
pub fn root_reductions<T: Scalar>(data: &Dataset<T>, min_bucket: usize) -> Vec<Option<f64>> {
    let spans = data.spans();
    let lambda0 = CumulativeHazard::nelson_aalen(&spans);
    let e = exposures(&spans, &lambda0);
    let events: Vec<bool> = spans.iter().map(|s| s.event).collect();
    let columns = data.columns();
    data.schema()
        .columns()
        .iter()
        .enumerate()
        .map(|(j, col)| {
            best_poisson_split(&columns[j], &events, &e, j, &col.kind, min_bucket).map(|(_, r)| r)
        })
        .collect()
}

pub type RiskTree<T> = Tree<T, RiskNode<T>>;

/// Grows the unpruned tree on records `rows` (indices into the column vectors).
pub fn grow_poisson_tree<T: Scalar>(
    schema: &CovariateSchema,
    columns: &[Vec<T>],
    events: &[bool],
    exposures: &[T],
    rows: Vec<usize>,
    controls: &CartControls,
) -> RiskTree<T> {
    let mut tree = Tree::new(schema.clone());
    let ev: Vec<bool> = rows.iter().map(|&i| events[i]).collect();
    let ex: Vec<T> = rows.iter().map(|&i| exposures[i]).collect();
    let root_dev = NodeStats::compute(&ev, &ex).deviance.as_f64();
    let gate = controls.cp_min * root_dev;
    let g = PoissonGrower {
        schema,
        columns,
        events,
        exposures,
        controls,
        gate,
    };
    g.grow(&mut tree, None, rows);
    annotate_complexity(&mut tree);
    tree
}

struct PoissonGrower<'a, T> {
    schema: &'a CovariateSchema,
    columns: &'a [Vec<T>],
    events: &'a [bool],
    exposures: &'a [T],
    controls: &'a CartControls,
    gate: f64,
}

impl<T: Scalar> PoissonGrower<'_, T> {
    fn grow(&self, tree: &mut RiskTree<T>, parent: Option<usize>, rows: Vec<usize>) -> usize {
        let ev: Vec<bool> = rows.iter().map(|&i| self.events[i]).collect();
        let ex: Vec<T> = rows.iter().map(|&i| self.exposures[i]).collect();
        let stats = NodeStats::compute(&ev, &ex);
        let id = tree.push(
            parent,
            rows.clone(),
            RiskNode {
                stats,
                collapse_alpha: f64::INFINITY,
            },
        );
        let depth = tree.node(id).depth;
        if rows.len() < self.controls.min_split
            || stats.events == 0
            || (self.controls.max_depth > 0 && depth >= self.controls.max_depth)
        {
            return id;
        }
        let cols: Vec<Vec<T>> = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect();
        let Some((rule, r)) = best_split_any(self.schema, &cols, &ev, &ex, self.controls.min_bucket)
        else {
            return id;
        };
        if !(r > self.gate) || r <= 0.0 {
            return id;
        }
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (k, &i) in rows.iter().enumerate() {
            let row: Vec<T> = cols.iter().map(|c| c[k]).collect();
            // every level present at the node is on one side of the rule
            if rule.goes_left(&row, self.schema).expect("levels present at node") {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        let l = self.grow(tree, Some(id), left);
        let r = self.grow(tree, Some(id), right);
        tree.set_split(id, Split { rule, left: l, right: r });
        id
    }
}

/// Weakest-link pruning: stores in every internal node the complexity at which it collapses.
fn annotate_complexity<T: Scalar>(tree: &mut RiskTree<T>) {
    let n = tree.len();
    let mut collapsed = vec![false; n];
    loop {
        // leaf deviance sum and leaf count of each current subtree, children before parents
        let mut sub_dev = vec![0.0f64; n];
        let mut sub_leaves = vec![0usize; n];
        for id in (0..n).rev() {
            let node = tree.node(id);
            match (&node.split, collapsed[id]) {
                (Some(s), false) => {
                    sub_dev[id] = sub_dev[s.left] + sub_dev[s.right];
                    sub_leaves[id] = sub_leaves[s.left] + sub_leaves[s.right];
                }
                _ => {
                    sub_dev[id] = node.payload.stats.deviance.as_f64();
                    sub_leaves[id] = 1;
                }
            }
        }
        if sub_leaves[0] == 1 {
            break;
        }
        let link = |id: usize| {
            (tree.node(id).payload.stats.deviance.as_f64() - sub_dev[id])
                / (sub_leaves[id] - 1) as f64
        };
        let active: Vec<usize> = (0..n)
            .filter(|&id| !tree.node(id).is_leaf() && !collapsed[id] && !hidden(tree, &collapsed, id))
            .collect();
        let alpha = active
            .iter()
            .map(|&id| link(id))
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        let tol = 1e-10 * alpha.abs().max(1e-300);
        let to_cut: Vec<usize> = active.into_iter().filter(|&id| link(id) <= alpha + tol).collect();
        for id in to_cut {
            for sub in tree.subtree(id) {
                if !collapsed[sub] && !tree.node(sub).is_leaf() {
                    collapsed[sub] = true;
                    tree.node_mut(sub).payload.collapse_alpha = alpha;
                }
            }
        }
    }
}

fn hidden<T: Scalar>(tree: &RiskTree<T>, collapsed: &[bool], id: usize) -> bool {
    let mut p = tree.node(id).parent;
    while let Some(q) = p {
        if collapsed[q] {
            return true;
        }
        p = tree.node(q).parent;
    }
    false
}

/// One subtree of the cost-complexity sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStep {
    /// Smallest complexity for which this subtree is optimal.
    #[serde(with = "crate::float_serde")]
    pub alpha: f64,
    pub leaves: usize,
    #[serde(with = "crate::float_serde")]
    pub train_deviance: f64,
    #[serde(with = "crate::float_serde::option")]
    pub cv_risk: Option<f64>,
    #[serde(with = "crate::float_serde::option")]
    pub cv_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSequence {
    pub steps: Vec<PruneStep>,
    /// Index of the selected subtree, when cross-validation has run.
    pub selected: Option<usize>,
}

/// Nested subtrees from the grown tree down to the root, with increasing thresholds.
pub fn cost_complexity_sequence<T: Scalar>(tree: &RiskTree<T>) -> PruneSequence {
    let mut alphas: Vec<f64> = tree
        .nodes()
        .iter()
        .filter(|n| !n.is_leaf())
        .map(|n| n.payload.collapse_alpha)
        .collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let mut steps = Vec::with_capacity(alphas.len() + 1);
    for alpha in std::iter::once(0.0).chain(alphas.iter().copied().filter(|&a| a > 0.0)) {
        let sub = prune_at(tree, alpha);
        steps.push(PruneStep {
            alpha,
            leaves: sub.leaf_count(),
            train_deviance: leaf_deviance(&sub),
            cv_risk: None,
            cv_se: None,
        });
    }
    PruneSequence {
        steps,
        selected: None,
    }
}

fn leaf_deviance<T: Scalar>(tree: &RiskTree<T>) -> f64 {
    tree.nodes()
        .iter()
        .filter(|n| n.is_leaf())
        .map(|n| n.payload.stats.deviance.as_f64())
        .sum()
}

/// Subtree optimal at complexity `alpha`.
pub fn prune_at<T: Scalar>(tree: &RiskTree<T>, alpha: f64) -> RiskTree<T> {
    tree.collapsed(|n| n.payload.collapse_alpha <= alpha)
}

fn leaf_at<'t, T: Scalar>(
    tree: &'t RiskTree<T>,
    row: &[T],
    alpha: f64,
) -> Result<&'t Node<T, RiskNode<T>>, TreeError> {
    let mut id = 0;
    loop {
        let node = tree.node(id);
        match &node.split {
            Some(s) if node.payload.collapse_alpha > alpha => {
                id = if s.rule.goes_left(row, tree.schema())? {
                    s.left
                } else {
                    s.right
                };
            }
            _ => return Ok(node),
        }
    }
}

/// Held-out deviance of one record at complexity `alpha`. A leaf without training
/// exposure defers to its parent; an event meeting a zero rate defers to the nearest
/// ancestor with a positive rate, so the risk stays finite.
fn held_out_deviance<T: Scalar>(
    tree: &RiskTree<T>,
    row: &[T],
    event: bool,
    e: T,
    alpha: f64,
) -> Result<f64, TreeError> {
    let mut node = leaf_at(tree, row, alpha)?;
    if node.payload.stats.exposure <= T::zero() {
        if let Some(p) = node.parent {
            node = tree.node(p);
        }
    }
    while event && e * node.payload.stats.theta <= T::zero() {
        match node.parent {
            Some(p) => node = tree.node(p),
            None => break,
        }
    }
    Ok(deviance_contribution(event, e, node.payload.stats.theta).as_f64())
}

/// Fold labels stratified by event flag: events then non-events are dealt round-robin after
/// a seeded shuffle.
pub fn stratified_folds(events: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut with: Vec<usize> = (0..events.len()).filter(|&i| events[i]).collect();
    let mut without: Vec<usize> = (0..events.len()).filter(|&i| !events[i]).collect();
    with.shuffle(&mut rng);
    without.shuffle(&mut rng);
    let mut out = vec![0; events.len()];
    for (k, &i) in with.iter().chain(&without).enumerate() {
        out[i] = k % folds;
    }
    out
}

fn folds_degenerate(labels: &[usize], events: &[bool], folds: usize) -> bool {
    (0..folds).any(|f| {
        !labels
            .iter()
            .zip(events)
            .any(|(&l, &ev)| l != f && ev)
    })
}

/// Cross-validated risk and standard error per step of `seq`, then subtree selection.
pub fn cv_select_subtree<T: Scalar>(
    data: &Dataset<T>,
    exposures: &[T],
    tree: &RiskTree<T>,
    seq: &mut PruneSequence,
    controls: &CartControls,
    seed: u64,
) -> Result<RiskTree<T>, TreeError> {
    let n = data.len();
    let k = controls.cv_folds;
    if k > n {
        return Err(TreeError::CrossValidation(format!(
            "{k} folds requested for {n} records"
        )));
    }
    let events: Vec<bool> = data.records().iter().map(|r| r.event()).collect();
    let mut labels = stratified_folds(&events, k, seed);
    if folds_degenerate(&labels, &events, k) {
        labels = stratified_folds(&events, k, seed.wrapping_add(1));
        if folds_degenerate(&labels, &events, k) {
            return Err(TreeError::CrossValidation(
                "a training fold has no events even after reshuffling".into(),
            ));
        }
    }
    let columns = data.columns();
    let m = seq.steps.len();
    let probes: Vec<f64> = (0..m)
        .map(|j| {
            if j + 1 < m {
                (seq.steps[j].alpha * seq.steps[j + 1].alpha).sqrt()
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let per_fold: Vec<Vec<(usize, Vec<f64>)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| labels[i] != f).collect();
            let fold_tree =
                grow_poisson_tree(data.schema(), &columns, &events, exposures, train, controls);
            (0..n)
                .filter(|&i| labels[i] == f)
                .map(|i| {
                    let row = data.records()[i].covariates().values();
                    probes
                        .iter()
                        .map(|&a| held_out_deviance(&fold_tree, row, events[i], exposures[i], a))
                        .collect::<Result<Vec<f64>, _>>()
                        .map(|d| (i, d))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, TreeError>>()?;
    let mut dev = vec![vec![0.0; n]; m];
    for (i, d) in per_fold.into_iter().flatten() {
        for j in 0..m {
            dev[j][i] = d[j];
        }
    }
    for (j, step) in seq.steps.iter_mut().enumerate() {
        let risk: f64 = dev[j].iter().sum();
        let mean = risk / n as f64;
        let se = dev[j].iter().map(|d| (d - mean).powi(2)).sum::<f64>().sqrt();
        step.cv_risk = Some(risk);
        step.cv_se = Some(se);
    }
    let risks: Vec<f64> = seq.steps.iter().map(|s| s.cv_risk.unwrap_or(f64::INFINITY)).collect();
    let mut best = 0;
    for j in 1..m {
        if risks[j] <= risks[best] {
            best = j;
        }
    }
    let bound = risks[best] + controls.se_rule * seq.steps[best].cv_se.unwrap_or(0.0);
    let chosen = (0..m).rev().find(|&j| risks[j] <= bound).unwrap_or(best);
    seq.selected = Some(chosen);
    Ok(prune_at(tree, seq.steps[chosen].alpha))
}

/// Fitted relative-risk tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LtrcartModel<T> {
    pub controls: CartControls,
    pub seed: u64,
    pub baseline: CumulativeHazard<T>,
    pub sequence: PruneSequence,
    pub tree: RiskTree<T>,
}

impl<T: Scalar> LtrcartModel<T> {
    /// Relative risk of the leaf and the curve `exp(-θ Λ(t))`.
    pub fn predict(&self, row: &[T]) -> Result<(T, SurvivalCurve<T>), TreeError> {
        let leaf = self.tree.route(row)?;
        let theta = self.tree.node(leaf).payload.stats.theta;
        Ok((theta, SurvivalCurve::from_cumulative_hazard(&self.baseline, theta)))
    }

    pub fn summary(&self) -> String {
        self.tree.outline(|node| {
            let s = &node.payload.stats;
            format!("events={} theta={:.4}", s.events, s.theta)
        })
    }

    pub fn to_dot(&self) -> String {
        self.tree.to_dot(|node| {
            let s = &node.payload.stats;
            format!(
                "theta = {:.4}\\nn = {}\\nevents = {}",
                s.theta,
                node.members.len(),
                s.events
            )
        })
    }
}

/// Nelson–Aalen baseline, exposures, growth, pruning sequence and cross-validated selection.
pub fn fit_ltrcart<T: Scalar>(
    data: &Dataset<T>,
    controls: &CartControls,
    seed: u64,
) -> Result<LtrcartModel<T>, TreeError> {
    controls.validate()?;
    if data.is_empty() {
        return Err(TreeError::Data("dataset is empty".into()));
    }
    if data.event_count() == 0 {
        return Err(TreeError::Data("dataset has no events".into()));
    }
    let spans = data.spans();
    let baseline = CumulativeHazard::nelson_aalen(&spans);
    let e = exposures(&spans, &baseline);
    let events: Vec<bool> = spans.iter().map(|s| s.event).collect();
    let grown = grow_poisson_tree(
        data.schema(),
        &data.columns(),
        &events,
        &e,
        (0..data.len()).collect(),
        controls,
    );
    let mut sequence = cost_complexity_sequence(&grown);
    let tree = if sequence.steps.len() > 1 {
        cv_select_subtree(data, &e, &grown, &mut sequence, controls, seed)?
    } else {
        sequence.selected = Some(0);
        grown
    };
    Ok(LtrcartModel {
        controls: *controls,
        seed,
        baseline,
        sequence,
        tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn deviance_examples() {
        assert_eq!(deviance_contribution(true, 1.0, 1.0), 0.0);
        assert_eq!(deviance_contribution(false, 0.5, 2.0), 2.0);
        assert!(deviance_contribution(true, 0.0f64, 3.0).is_infinite());
    }

    #[test]
    fn exposure_example() {
        let spans = vec![
            Span::new(0.0, 2.0, true),
            Span::new(1.0, 3.0, false),
            Span::new(1.0, 4.0, true),
        ];
        let lambda = CumulativeHazard::nelson_aalen(&spans);
        let e = exposures(&spans, &lambda);
        assert_abs_diff_eq!(e[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e[2], 4.0 / 3.0 - 0.0, epsilon = 1e-15);
    }

    #[test]
    fn node_identity() {
        let st = NodeStats::compute(&[true, false, true], &[0.3, 0.7, 0.4]);
        assert_eq!(st.events, 2);
        assert_abs_diff_eq!(st.theta * st.exposure, 2.0, epsilon = 1e-15);
        let zero = NodeStats::compute(&[false, false], &[0.0, 0.0]);
        assert_eq!((zero.theta, zero.deviance), (0.0, 0.0));
    }

    #[test]
    fn reduction_matches_deviance_difference() {
        let ev = [true, false, true, true, false, false, true, false];
        let ex = [0.2, 0.5, 0.1, 0.3, 0.9, 1.2, 0.4, 0.8];
        let parent = NodeStats::compute(&ev, &ex);
        let l = NodeStats::compute(&ev[..4], &ex[..4]);
        let r = NodeStats::compute(&ev[4..], &ex[4..]);
        let direct = parent.deviance - l.deviance - r.deviance;
        let fast = reduction(l.events, l.exposure, parent.events, parent.exposure);
        assert_abs_diff_eq!(direct, fast, epsilon = 1e-12);
        assert!(direct >= 0.0);
    }

    #[test]
    fn controls_validation() {
        assert!(CartControls::default().validate().is_ok());
        assert!(CartControls { cv_folds: 1, ..Default::default() }.validate().is_err());
        assert!(CartControls { se_rule: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn folds_are_stratified() {
        let events: Vec<bool> = (0..40).map(|i| i % 4 == 0).collect();
        let f = stratified_folds(&events, 5, 7);
        for fold in 0..5 {
            let ev = (0..40).filter(|&i| f[i] == fold && events[i]).count();
            let all = (0..40).filter(|&i| f[i] == fold).count();
            assert_eq!((ev, all), (2, 8));
        }
        assert_eq!(f, stratified_folds(&events, 5, 7));
    }
}
