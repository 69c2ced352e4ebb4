//! Data-generating processes and experiment drivers.
//!
//! Every generator is a pure function of its scenario and a [`rand_chacha::ChaCha8Rng`]
//! stream; trial streams are seeded by [`experiments::trial_seed`].

pub mod calibrate;
pub mod experiments;
pub mod families;
pub mod generate;
pub mod scenario;
pub mod timevarying;

pub use calibrate::calibrate_censoring;
pub use experiments::{
    run_grid, run_ibs_experiment, run_null_selection_experiment, run_recovery_experiment, run_scenario,
    trial_seed, write_results, Methods, ResultRow, TrialResult,
};
pub use families::Distribution;
pub use generate::{Generator, Subject, TrueSurvival};
pub use scenario::{Experiment, Family, ScenarioFile, ScenarioSpec, Setup};
pub use timevarying::{path_cumulative_hazard, piecewise_ph_invert, Baseline, TvParams};
