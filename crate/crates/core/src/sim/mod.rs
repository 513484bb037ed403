//! Fixed-step simulation of the vehicle models and synthetic log generation.

pub mod delay_line;
pub mod integrate;
pub mod library;
pub mod scenario;
pub mod simulate;

use thiserror::Error;

use crate::models::ModelError;
use crate::sysid::LogError;

pub use delay_line::DelayLine;
pub use integrate::{integrate_rk4, observed_orders, rk4_step};
pub use library::{
    circular_ramp, coast_down_battery, scenario_library, sine_steering, steady_throttle, steering_battery,
    step_battery, LibraryOptions, LibraryScenario,
};
pub use scenario::{ModelKind, Scenario, Schedule, MAX_DT};
pub use simulate::{
    sample_log, simulate, synthesize_log, NoiseSpec, StateSeries, Trajectory, BLEND_SPEED, DIVERGENCE_LIMIT,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario at `{path}`: {reason}")]
    InvalidScenario { path: String, reason: String },
    #[error("integration step must be > 0, got {0}")]
    InvalidStep(f64),
    #[error("delay line needs delay >= 0 and dt > 0, got delay {delay}, dt {dt}")]
    InvalidDelay { delay: f64, dt: f64 },
    #[error("noise deviation for `{channel}` must be finite and >= 0, got {value}")]
    InvalidNoise { channel: &'static str, value: f64 },
    #[error("non-finite state derivative at t = {t} s")]
    NonFinite { t: f64 },
    #[error("state component {component} reached {value} at t = {t} s")]
    Diverged { t: f64, component: usize, value: f64 },
    #[error("simulation aborted after {} samples: {cause}", partial.len())]
    Aborted { cause: Box<SimError>, partial: Box<Trajectory> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Log(#[from] LogError),
}
