//! Split conformal prediction with width-based model selection.
//!
//! Candidate prediction-set families are calibrated on held-out data and the
//! narrowest one is selected either directly ([`efcp`], efficiency first) or
//! followed by recalibration on a fresh fold ([`vfcp`], validity first).

pub mod acceptance;
pub mod conformal;
pub mod data;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod experiment;
pub mod family;
pub mod linalg;
pub mod linear;
pub mod ridge;
pub mod synth;

pub use conformal::{
    conformal_quantile, conformal_rank, efcp, evaluate_coverage, split_conformal, theorem1_slack, vfcp,
    CalibrationResult, CoverageReport, SelectionResult,
};
pub use data::{load_csv, split, Dataset, SplitPlan};
pub use error::{Error, Result};
pub use experiment::{
    emit_csv, emit_plot, read_report, run_experiment, run_experiment_with_jobs, ExperimentConfig, ExperimentReport,
    Method, Scenario,
};
pub use family::{
    cqr_family, density_level_family, fixed_width_family, linear_theta_family, CqrVariant, NestedFamily,
    PredictionSet,
};
