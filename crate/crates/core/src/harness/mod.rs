//! Experiment drivers and their reports.

mod config;
mod experiments;
mod noncolliding;

pub use config::{BirthdayCase, BirthdayConfig, ConcentrationConfig, ExperimentConfig, FiniteSampleConfig};
pub use experiments::{
    birthday_approx, birthday_exact, derive_seed, run_birthday_experiment, run_birthday_report,
    run_collapse_experiment, run_concentration_experiment, run_finite_sample_experiment, stratified_means,
    BirthdayOutcome, BirthdayReport, BirthdayRow, CellError, CollapseReport, CollapseRow, ConcentrationRatio,
    ConcentrationReport, ConcentrationRow, FiniteSampleReport, FiniteSampleRow, Report, SCHEMA_VERSION,
};
pub use noncolliding::{check_noncolliding_identity, sample_noncolliding, set_mean, IdentityCheck, NonCollidingSet};
