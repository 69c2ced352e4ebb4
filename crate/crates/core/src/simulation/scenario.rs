//! Declarative scenario grids.

use serde::{Deserialize, Serialize};

use super::families::Distribution;
use super::timevarying::TvParams;
use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Structure recovery and splitting-variable identification.
    Recovery,
    /// Prediction error on a companion test set.
    Ibs,
    /// First-split variable frequencies with a response independent of all covariates.
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    /// Four-leaf tree on X1, X2, X3 with noise covariates X4, X5, X6.
    Tree,
    /// Proportional hazards with `θ = -X1 - X2`.
    Linear,
    /// `θ = -[cos((X1 + X2) π) + sqrt(X1 + X2)]`.
    Nonlinear,
    /// Binary X2 switching 0 -> 1 once.
    TvType1,
    /// Binary X2 switching 0 -> 1 -> 0 -> 1.
    TvType2,
    /// Continuous X2 redrawn at three switch times; the hazard uses `X2 > 5`.
    TvContinuous,
    /// Continuous X2 redrawn at one switch time.
    TvContinuousSingle,
}

impl Setup {
    pub fn is_time_varying(&self) -> bool {
        matches!(
            self,
            Setup::TvType1 | Setup::TvType2 | Setup::TvContinuous | Setup::TvContinuousSingle
        )
    }

    pub fn is_continuous_tv(&self) -> bool {
        matches!(self, Setup::TvContinuous | Setup::TvContinuousSingle)
    }

    pub fn switches(&self) -> usize {
        match self {
            Setup::TvType1 | Setup::TvContinuousSingle => 1,
            Setup::TvType2 | Setup::TvContinuous => 3,
            _ => 0,
        }
    }

    pub fn covariate_names(&self) -> Vec<String> {
        let k = if self.is_time_varying() { 5 } else { 6 };
        (1..=k).map(|j| format!("X{j}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Exponential,
    WeibullIncreasing,
    WeibullDecreasing,
    Lognormal,
    Bathtub,
    Weibull,
    Gompertz,
}

/// One scenario of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub experiment: Experiment,
    pub setup: Setup,
    pub family: Family,
    /// Upper bound `U` of the uniform truncation time; 0 disables truncation.
    #[serde(default)]
    pub truncation: f64,
    /// Target censored fraction in `[0, 1)`.
    #[serde(default)]
    pub censoring: f64,
    pub n: usize,
    /// Overrides the grid-wide trial count.
    #[serde(default)]
    pub trials: Option<usize>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Scenario(format!("{}: {m}", self.name)));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.censoring) {
            return bad(format!("censoring target {} outside [0, 1)", self.censoring));
        }
        if !(self.truncation >= 0.0) || !self.truncation.is_finite() {
            return bad(format!("truncation bound {} must be non-negative", self.truncation));
        }
        let family_ok = match self.setup {
            Setup::Tree => matches!(
                self.family,
                Family::Exponential
                    | Family::WeibullIncreasing
                    | Family::WeibullDecreasing
                    | Family::Lognormal
                    | Family::Bathtub
            ),
            Setup::Linear | Setup::Nonlinear => matches!(
                self.family,
                Family::Exponential | Family::WeibullIncreasing | Family::WeibullDecreasing
            ),
            _ => matches!(self.family, Family::Exponential | Family::Weibull | Family::Gompertz),
        };
        if !family_ok {
            return bad(format!("family {:?} is not defined for setup {:?}", self.family, self.setup));
        }
        if self.setup.is_time_varying() && self.truncation != 0.0 {
            return bad("time-varying setups start follow-up at 0; truncation must be 0".into());
        }
        if self.experiment == Experiment::Null && self.setup != Setup::Tree {
            return bad("the null experiment uses the tree setup covariates".into());
        }
        Ok(())
    }

    /// Leaf distributions of the tree setup, in leaf order.
    pub fn leaf_distributions(&self) -> Result<[Distribution; 4], SimError> {
        Ok(match self.family {
            Family::Exponential => [0.1, 0.23, 0.4, 0.9].map(|rate| Distribution::Exponential { rate }),
            Family::WeibullIncreasing => {
                [2.0, 4.3, 6.2, 10.0].map(|scale| Distribution::Weibull { shape: 3.0, scale })
            }
            Family::WeibullDecreasing => {
                [7.0, 3.0, 2.5, 1.0].map(|scale| Distribution::Weibull { shape: 0.9, scale })
            }
            Family::Lognormal => [(2.0, 0.3), (1.7, 0.2), (1.3, 0.3), (0.5, 0.5)]
                .map(|(mu, sigma)| Distribution::Lognormal { mu, sigma }),
            Family::Bathtub => [0.01, 0.05, 0.1, 0.7].map(|a| Distribution::Bathtub { a, b: 1.0, c: 5.0 }),
            _ => {
                return Err(SimError::Scenario(format!(
                    "family {:?} has no tree-setup parameters",
                    self.family
                )))
            }
        })
    }

    /// Distribution of `T` given the linear predictor `θ` in the proportional-hazards setups.
    pub fn ph_distribution(&self, theta: f64) -> Result<Distribution, SimError> {
        Ok(match self.family {
            Family::Exponential => Distribution::Exponential { rate: theta.exp() },
            Family::WeibullIncreasing => Distribution::Weibull {
                shape: 2.0,
                scale: 10.0 * theta.exp(),
            },
            Family::WeibullDecreasing => Distribution::Weibull {
                shape: 0.5,
                scale: 5.0 * theta.exp(),
            },
            _ => {
                return Err(SimError::Scenario(format!(
                    "family {:?} is not a proportional-hazards family",
                    self.family
                )))
            }
        })
    }

    pub fn tv_params(&self) -> Result<TvParams, SimError> {
        Ok(match self.family {
            Family::Exponential => TvParams::exponential(),
            Family::Weibull => TvParams::weibull(),
            Family::Gompertz => TvParams::gompertz(),
            _ => {
                return Err(SimError::Scenario(format!(
                    "family {:?} has no time-varying parameters",
                    self.family
                )))
            }
        })
    }
}

/// A grid of scenarios sharing a trial count and master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub trials: usize,
    pub seed: u64,
    #[serde(rename = "scenario", default)]
    pub scenarios: Vec<ScenarioSpec>,
}

impl ScenarioFile {
    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let file: ScenarioFile = toml::from_str(s).map_err(|e| SimError::Scenario(e.to_string()))?;
        let mut names = std::collections::HashSet::new();
        for spec in &file.scenarios {
            spec.validate()?;
            if !names.insert(spec.name.as_str()) {
                return Err(SimError::Scenario(format!("duplicate scenario name '{}'", spec.name)));
            }
        }
        Ok(file)
    }
}
