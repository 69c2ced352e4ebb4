//! Latent subjects, observation processes, companion test sets and ground truth.

use std::sync::Arc;

use rand::distr::{Distribution as _, Open01};
use rand::Rng;

use super::families::Distribution;
use super::scenario::{Experiment, ScenarioSpec, Setup};
use super::timevarying::{path_cumulative_hazard, piecewise_ph_invert, Baseline, TvParams};
use crate::data::{Column, CovariateRow, CovariateSchema, Dataset, LtrcRecord};
use crate::error::SimError;
use crate::estimators::SurvivalCurve;
use crate::evaluation::{Condition, Domain, TruthPartition};

/// Switch times of the time-varying covariate are drawn from this interval.
pub const SWITCH_WINDOW: (f64, f64) = (0.6, 6.0);
/// Threshold on the continuous time-varying covariate.
pub const CONTINUOUS_CUT: f64 = 5.0;
/// Fraction of a continuous domain tolerated around true cuts when scoring recovery.
pub const RECOVERY_TOLERANCE: f64 = 0.1;
const ORACLE_GRID: usize = 400;

/// An unobserved subject: covariates at time 0, entry time, event time and, for the
/// time-varying setups, the path of X2 as `(start, value)` segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub covariates: Vec<f64>,
    pub left: f64,
    pub time: f64,
    pub path: Vec<(f64, f64)>,
}

impl Subject {
    /// Residual time exposed to censoring.
    pub fn residual(&self) -> f64 {
        self.time - self.left
    }
}

/// Conditional survival function of one test subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrueSurvival {
    Parametric(Distribution),
    /// Constant covariates under the time-varying model, conditional on `T > left`.
    Hazard { baseline: Baseline, theta: f64, left: f64 },
}

impl TrueSurvival {
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            TrueSurvival::Parametric(d) => d.survival(t),
            TrueSurvival::Hazard { baseline, theta, left } => {
                if t <= left {
                    1.0
                } else {
                    (-(theta.exp()) * (baseline.cumulative(t) - baseline.cumulative(left))).exp()
                }
            }
        }
    }

    /// Step approximation on an equispaced grid over `(0, horizon]`, each step taking the
    /// value at its midpoint.
    pub fn curve(&self, horizon: f64) -> SurvivalCurve<f64> {
        let h = horizon / ORACLE_GRID as f64;
        let knots: Vec<f64> = (1..=ORACLE_GRID).map(|k| h * k as f64).collect();
        let mut values: Vec<f64> = knots.iter().map(|&t| self.survival(t - 0.5 * h)).collect();
        for k in 1..values.len() {
            values[k] = values[k].min(values[k - 1]);
        }
        SurvivalCurve::new(knots, values).expect("monotone grid in [0, 1]")
    }
}

#[derive(Debug, Clone)]
enum Model {
    Tree([Distribution; 4]),
    Null(Distribution),
    Ph,
    Tv(TvParams),
}

/// Data-generating process of one scenario.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: ScenarioSpec,
    model: Model,
    schema: Arc<CovariateSchema>,
}

fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

fn level<R: Rng + ?Sized>(rng: &mut R, lo: i32, hi: i32) -> f64 {
    f64::from(rng.random_range(lo..=hi))
}

impl Generator {
    pub fn new(spec: &ScenarioSpec) -> Result<Self, SimError> {
        spec.validate()?;
        let model = match spec.setup {
            Setup::Tree if spec.experiment == Experiment::Null => Model::Null(spec.leaf_distributions()?[2]),
            Setup::Tree => Model::Tree(spec.leaf_distributions()?),
            Setup::Linear | Setup::Nonlinear => {
                spec.ph_distribution(0.0)?;
                Model::Ph
            }
            _ => Model::Tv(spec.tv_params()?),
        };
        let columns = spec
            .setup
            .covariate_names()
            .iter()
            .map(|n| Column::numeric(n))
            .collect();
        Ok(Generator {
            spec: spec.clone(),
            model,
            schema: Arc::new(CovariateSchema::new(columns)?),
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    /// Leaf of the tree setup for covariates `x`.
    pub fn tree_leaf(x: &[f64]) -> usize {
        match (x[0] <= 2.0, x[1] == 1.0, x[2] <= 1.0) {
            (true, true, _) => 0,
            (true, false, _) => 1,
            (false, _, true) => 2,
            (false, _, false) => 3,
        }
    }

    fn ph_theta(&self, x: &[f64]) -> f64 {
        let s = x[0] + x[1];
        match self.spec.setup {
            Setup::Linear => -s,
            _ => -((s * std::f64::consts::PI).cos() + s.sqrt()),
        }
    }

    fn tree_covariates<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
        vec![
            level(rng, 1, 5),
            level(rng, 1, 2),
            rng.random_range(0.0..2.0),
            level(rng, 1, 5),
            level(rng, 1, 2),
            rng.random_range(0.0..2.0),
        ]
    }

    fn ph_covariates<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
        vec![
            rng.random::<f64>(),
            level(rng, 0, 1),
            level(rng, 0, 1),
            rng.random::<f64>(),
            rng.random::<f64>(),
            level(rng, 0, 1),
        ]
    }

    fn tv_noise<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
        [level(rng, 0, 1), rng.random::<f64>(), level(rng, 1, 5)]
    }

    fn tv_indicator(&self, x2: f64) -> f64 {
        if self.spec.setup.is_continuous_tv() {
            f64::from(u8::from(x2 > CONTINUOUS_CUT))
        } else {
            x2
        }
    }

    /// Distribution of `T` for fixed covariates (not used by the time-varying setups).
    pub fn distribution(&self, x: &[f64]) -> Result<Distribution, SimError> {
        match &self.model {
            Model::Tree(d) => Ok(d[Self::tree_leaf(x)]),
            Model::Null(d) => Ok(*d),
            Model::Ph => self.spec.ph_distribution(self.ph_theta(x)),
            Model::Tv(_) => Err(SimError::Scenario("time-varying setups have no fixed-covariate law".into())),
        }
    }

    /// Draws until `T > L`.
    pub fn draw_subject<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Subject, SimError> {
        if let Model::Tv(p) = &self.model {
            return self.draw_tv_subject(p, rng);
        }
        loop {
            let covariates = match self.model {
                Model::Ph => Self::ph_covariates(rng),
                _ => Self::tree_covariates(rng),
            };
            let left = if self.spec.truncation > 0.0 {
                rng.random_range(0.0..self.spec.truncation)
            } else {
                0.0
            };
            let time = self.distribution(&covariates)?.sample(rng)?;
            if time > left {
                return Ok(Subject {
                    covariates,
                    left,
                    time,
                    path: Vec::new(),
                });
            }
        }
    }

    fn draw_tv_subject<R: Rng + ?Sized>(&self, p: &TvParams, rng: &mut R) -> Result<Subject, SimError> {
        let x1 = level(rng, 0, 1);
        let mut switches: Vec<f64> = (0..self.spec.setup.switches())
            .map(|_| rng.random_range(SWITCH_WINDOW.0..SWITCH_WINDOW.1))
            .collect();
        switches.sort_by(f64::total_cmp);
        let mut path = Vec::with_capacity(switches.len() + 1);
        if self.spec.setup.is_continuous_tv() {
            path.push((0.0, rng.random_range(0.0..10.0)));
            for s in switches {
                path.push((s, rng.random_range(0.0..10.0)));
            }
        } else {
            path.push((0.0, 0.0));
            for (k, s) in switches.into_iter().enumerate() {
                path.push((s, if k % 2 == 0 { 1.0 } else { 0.0 }));
            }
        }
        let z_path: Vec<(f64, f64)> = path.iter().map(|&(s, v)| (s, self.tv_indicator(v))).collect();
        let u = uniform01(rng);
        let time = piecewise_ph_invert(&p.baseline, p.beta * x1, p.beta_z, &z_path, u)?;
        let noise = Self::tv_noise(rng);
        Ok(Subject {
            covariates: vec![x1, path[0].1, noise[0], noise[1], noise[2]],
            left: 0.0,
            time,
            path,
        })
    }

    /// Cumulative hazard of a time-varying subject at `t`.
    pub fn tv_cumulative_hazard(&self, subject: &Subject, t: f64) -> Result<f64, SimError> {
        let Model::Tv(p) = &self.model else {
            return Err(SimError::Scenario("not a time-varying setup".into()));
        };
        let z_path: Vec<(f64, f64)> = subject
            .path
            .iter()
            .map(|&(s, v)| (s, self.tv_indicator(v)))
            .collect();
        Ok(path_cumulative_hazard(&p.baseline, p.beta * subject.covariates[0], p.beta_z, &z_path, t))
    }

    /// Observed records of one subject under exponential censoring at rate `lambda_d`
    /// (0 disables censoring). Time-varying subjects become one record per covariate segment.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        id: usize,
        subject: &Subject,
        lambda_d: f64,
        rng: &mut R,
    ) -> Result<Vec<LtrcRecord<f64>>, SimError> {
        let delay = if lambda_d > 0.0 {
            -uniform01(rng).ln() / lambda_d
        } else {
            f64::INFINITY
        };
        let censor = subject.left + delay;
        let event = subject.time <= censor;
        let exit = subject.time.min(censor);
        let sid = format!("S{id}");
        if subject.path.is_empty() {
            let row = CovariateRow::new(&self.schema, subject.covariates.clone())?;
            return Ok(vec![LtrcRecord::new(sid, subject.left, exit, event, row)?]);
        }
        let segments: Vec<(f64, f64)> = subject.path.iter().copied().filter(|s| s.0 < exit).collect();
        let mut out = Vec::with_capacity(segments.len());
        for (k, &(start, x2)) in segments.iter().enumerate() {
            let last = k + 1 == segments.len();
            let end = if last { exit } else { segments[k + 1].0 };
            let values = if k == 0 {
                subject.covariates.clone()
            } else {
                let noise = Self::tv_noise(rng);
                vec![subject.covariates[0], x2, noise[0], noise[1], noise[2]]
            };
            let row = CovariateRow::new(&self.schema, values)?;
            out.push(LtrcRecord::new(sid.clone(), start, end, event && last, row)?);
        }
        Ok(out)
    }

    /// Training data of `spec.n` subjects.
    pub fn dataset<R: Rng + ?Sized>(&self, lambda_d: f64, rng: &mut R) -> Result<Dataset<f64>, SimError> {
        let mut records = Vec::with_capacity(self.spec.n);
        for i in 0..self.spec.n {
            let s = self.draw_subject(rng)?;
            records.extend(self.observe(i + 1, &s, lambda_d, rng)?);
        }
        Ok(Dataset::new(self.schema.clone(), records)?)
    }

    /// Companion test set of `spec.n` subjects with their true survival functions. Fixed
    /// covariate setups are neither truncated nor censored; the time-varying setups use the
    /// four constant-covariate nodes, cycling through them.
    pub fn test_set<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(Dataset<f64>, Vec<TrueSurvival>), SimError> {
        let mut records = Vec::with_capacity(self.spec.n);
        let mut truth = Vec::with_capacity(self.spec.n);
        for i in 0..self.spec.n {
            let (x, left, exit, event, law) = match &self.model {
                Model::Tv(p) => self.tv_test_subject(p, i % 4, rng)?,
                _ => {
                    let x = match self.model {
                        Model::Ph => Self::ph_covariates(rng),
                        _ => Self::tree_covariates(rng),
                    };
                    let d = self.distribution(&x)?;
                    let t = d.sample(rng)?;
                    (x, 0.0, t, true, TrueSurvival::Parametric(d))
                }
            };
            let row = CovariateRow::new(&self.schema, x)?;
            records.push(LtrcRecord::new(format!("T{}", i + 1), left, exit, event, row)?);
            truth.push(law);
        }
        Ok((Dataset::new(self.schema.clone(), records)?, truth))
    }

    /// Node 0: `X1 = 1, z = 1`; node 1: `X1 = 1, z = 0`; node 2: `X1 = 0, z = 1`; node 3:
    /// `X1 = 0, z = 0`. Nodes with `z = 1` are left-truncated at the start of the switch
    /// window, the others right-censored at its end.
    #[allow(clippy::type_complexity)]
    fn tv_test_subject<R: Rng + ?Sized>(
        &self,
        p: &TvParams,
        node: usize,
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64, f64, bool, TrueSurvival), SimError> {
        let x1 = if node < 2 { 1.0 } else { 0.0 };
        let z = if node.is_multiple_of(2) { 1.0 } else { 0.0 };
        let theta = p.beta * x1 + p.beta_z * z;
        let x2 = if self.spec.setup.is_continuous_tv() {
            if z == 1.0 {
                rng.random_range(CONTINUOUS_CUT..10.0)
            } else {
                rng.random_range(0.0..CONTINUOUS_CUT)
            }
        } else {
            z
        };
        let noise = Self::tv_noise(rng);
        let x = vec![x1, x2, noise[0], noise[1], noise[2]];
        let path = [(0.0, 0.0)];
        if z == 1.0 {
            let left = SWITCH_WINDOW.0;
            let t = loop {
                let t = piecewise_ph_invert(&p.baseline, theta, 0.0, &path, uniform01(rng))?;
                if t > left {
                    break t;
                }
            };
            let law = TrueSurvival::Hazard {
                baseline: p.baseline,
                theta,
                left,
            };
            Ok((x, left, t, true, law))
        } else {
            let t = piecewise_ph_invert(&p.baseline, theta, 0.0, &path, uniform01(rng))?;
            let law = TrueSurvival::Hazard {
                baseline: p.baseline,
                theta,
                left: 0.0,
            };
            Ok((x, 0.0, t.min(SWITCH_WINDOW.1), t <= SWITCH_WINDOW.1, law))
        }
    }

    /// Target partition, for setups with a tree-structured truth.
    pub fn truth(&self) -> Option<TruthPartition<f64>> {
        let discrete = |lo: i32, hi: i32| Domain::Discrete((lo..=hi).map(f64::from).collect());
        match &self.model {
            Model::Tree(_) => Some(TruthPartition {
                leaves: vec![
                    vec![Condition::Le(0, 2.0), Condition::In(1, vec![1.0])],
                    vec![Condition::Le(0, 2.0), Condition::In(1, vec![2.0])],
                    vec![Condition::Gt(0, 2.0), Condition::Le(2, 1.0)],
                    vec![Condition::Gt(0, 2.0), Condition::Gt(2, 1.0)],
                ],
                domains: vec![
                    discrete(1, 5),
                    discrete(1, 2),
                    Domain::Continuous { lo: 0.0, hi: 2.0 },
                    discrete(1, 5),
                    discrete(1, 2),
                    Domain::Continuous { lo: 0.0, hi: 2.0 },
                ],
                tolerance: RECOVERY_TOLERANCE,
            }),
            Model::Tv(_) => {
                let continuous = self.spec.setup.is_continuous_tv();
                let (lo, hi) = if continuous {
                    (Condition::Le(1, CONTINUOUS_CUT), Condition::Gt(1, CONTINUOUS_CUT))
                } else {
                    (Condition::In(1, vec![0.0]), Condition::In(1, vec![1.0]))
                };
                let leaves = [0.0, 1.0]
                    .iter()
                    .flat_map(|&x1| {
                        [lo.clone(), hi.clone()]
                            .into_iter()
                            .map(move |c| vec![Condition::In(0, vec![x1]), c])
                    })
                    .collect();
                Some(TruthPartition {
                    leaves,
                    domains: vec![
                        discrete(0, 1),
                        if continuous {
                            Domain::Continuous { lo: 0.0, hi: 10.0 }
                        } else {
                            discrete(0, 1)
                        },
                        discrete(0, 1),
                        Domain::Continuous { lo: 0.0, hi: 1.0 },
                        discrete(1, 5),
                    ],
                    tolerance: RECOVERY_TOLERANCE,
                })
            }
            Model::Null(_) | Model::Ph => None,
        }
    }

    /// Covariates that carry signal.
    pub fn signal_covariates(&self) -> Vec<usize> {
        match self.model {
            Model::Null(_) => vec![],
            Model::Ph => vec![0, 1],
            Model::Tree(_) => vec![0, 1, 2],
            Model::Tv(_) => vec![0, 1],
        }
    }
}
