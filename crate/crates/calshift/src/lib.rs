//! Experiment harness for calibration under context-driven covariate shift:
//! scenario construction (synthetic link, Gaussian toy, ingested CSV),
//! the seven set-prediction pipelines, empirical coverage/inefficiency
//! metrics, reproducible experiment orchestration, and result persistence.
//!
//! Determinism contract: a configuration plus its master seed fully
//! determines every scientific output. Randomness is drawn from
//! counter-derived streams keyed by (stage, experiment cell), so trials may
//! run in parallel and results never depend on scheduling.

pub mod config;
pub mod diagnostics;
mod error;
pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod pipelines;
pub mod reproduce;
pub mod rng;
pub mod scenario;

pub use config::{
    CountsConfig, ExperimentConfig, GaussianContextSpec, GaussianScenarioConfig,
    IngestedScenarioConfig, Method, PhyContextSpec, PhyScenarioConfig, ScenarioConfig,
    SelectionConfig, SplitTag, TrainSettings,
};
pub use error::HarnessError;
pub use experiment::{
    evaluate_fixed_pair, run_experiment, run_experiment_with_jobs, write_manifest,
    write_records_csv, ExperimentRecord, ModelSet, PairOutcome,
};
pub use metrics::{box_stats, empirical_metrics, BoxStats};
pub use scenario::{DrawnSample, Scenario};

pub type Result<T> = std::result::Result<T, HarnessError>;
