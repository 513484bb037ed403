//! Turning driving logs into training datasets and fitting the sub-models.

pub mod builders;
pub mod curves;
pub mod dataset;
pub mod delay;
pub mod log;
pub mod optim;
pub mod pipeline;
pub mod signal;

use thiserror::Error;

pub use builders::{
    build_friction_dataset, build_motor_dataset, build_steering_dataset, build_tire_dataset,
    estimate_steering_angle_series, solve_body_forces, BuildWarning, PrepOptions, TireDatasets,
};
pub use curves::{
    squared_error_loss, Curve, CurveObjective, FrictionCurve, MotorCurve, PacejkaCurve,
    RearLinearCurve, SteeringCurve,
};
pub use dataset::{ColumnInfo, Dataset};
pub use delay::{estimate_delay_xcorr, DEFAULT_MAX_DELAY};
pub use log::{load_log, LogError, Mocap, RawLog};
pub use optim::{adam_fit, finite_difference_gradient, FitConfig, FitResult, FnObjective, Objective};
pub use pipeline::{
    default_fit_config, estimate_steering_delay, fit_friction, fit_motor, fit_pipeline, fit_steering,
    fit_tires, Experiment, FitSummary, ParamsDocument, ParamsDocumentError, PipelineConfig,
    PipelineOutcome, Stage, StageReport, StageStatus, TaggedLog, PARAMS_SCHEMA_VERSION,
};
pub use signal::{differentiate, differentiate_uniform5, smooth};

#[derive(Debug, Error)]
pub enum SysIdError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("time stamps not strictly increasing at index {index}")]
    NonMonotoneTime { index: usize },
    #[error("smoothing window {window} must be odd, positive and at most the series length {len}")]
    SmoothingWindow { window: usize, len: usize },
    #[error("non-finite value in dataset row {row}")]
    NonFiniteData { row: usize },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error("loss or gradient became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
    #[error("no data: {0}")]
    NoData(&'static str),
    #[error("log {log_index} has no motion-capture columns")]
    MissingMocap { log_index: usize },
    #[error("signal has no variation")]
    FlatSignal,
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
}
