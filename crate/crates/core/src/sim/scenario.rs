//! Scripted input scenarios and their JSON form.

use serde::{Deserialize, Serialize};

use crate::models::{DynamicState, SlipModel};

use super::SimError;

/// Largest accepted integration step (s).
pub const MAX_DT: f64 = 0.05;

/// A command as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Schedule {
    Constant { value: f64 },
    /// `before` until `at`, `after` from then on.
    Step { before: f64, after: f64, at: f64 },
    /// `values[i]` on `[times[i], times[i+1])`; `values[0]` before `times[0]`.
    Piecewise { times: Vec<f64>, values: Vec<f64> },
    /// `offset + amplitude sin(2 pi frequency t + phase)`.
    Sine {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Linear from `from` at `t0` to `to` at `t1`, constant outside.
    Ramp { from: f64, to: f64, t0: f64, t1: f64 },
}

impl Schedule {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant { value } => *value,
            Schedule::Step { before, after, at } => {
                if t < *at {
                    *before
                } else {
                    *after
                }
            }
            Schedule::Piecewise { times, values } => {
                let k = times.partition_point(|&ti| ti <= t);
                values[k.saturating_sub(1)]
            }
            Schedule::Sine { offset, amplitude, frequency, phase } => {
                offset + amplitude * (2.0 * std::f64::consts::PI * frequency * t + phase).sin()
            }
            Schedule::Ramp { from, to, t0, t1 } => {
                if t <= *t0 {
                    *from
                } else if t >= *t1 {
                    *to
                } else {
                    from + (to - from) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    /// Checks that every value the schedule can produce lies in `[-1, 1]`.
    /// `path` names the schedule in error messages.
    pub fn validate(&self, path: &str) -> Result<(), SimError> {
        let bad = |field: &str, reason: String| Err(SimError::InvalidScenario { path: format!("{path}.{field}"), reason });
        let in_range = |v: f64| v.is_finite() && (-1.0..=1.0).contains(&v);
        match self {
            Schedule::Constant { value } if !in_range(*value) => bad("value", format!("{value} outside [-1, 1]")),
            Schedule::Step { before, after, at } => {
                if !at.is_finite() {
                    bad("at", format!("{at} is not finite"))
                } else if !in_range(*before) {
                    bad("before", format!("{before} outside [-1, 1]"))
                } else if !in_range(*after) {
                    bad("after", format!("{after} outside [-1, 1]"))
                } else {
                    Ok(())
                }
            }
            Schedule::Piecewise { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return bad("times", format!("{} times for {} values (need equal, non-empty)", times.len(), values.len()));
                }
                if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
                    return bad(&format!("times[{}]", i + 1), "times must be strictly increasing".into());
                }
                if let Some(i) = times.iter().position(|t| !t.is_finite()) {
                    return bad(&format!("times[{i}]"), "not finite".into());
                }
                match values.iter().position(|&v| !in_range(v)) {
                    Some(i) => bad(&format!("values[{i}]"), format!("{} outside [-1, 1]", values[i])),
                    None => Ok(()),
                }
            }
            Schedule::Sine { offset, amplitude, frequency, phase } => {
                if !(frequency.is_finite() && *frequency >= 0.0) {
                    bad("frequency", format!("{frequency} must be finite and >= 0"))
                } else if !phase.is_finite() {
                    bad("phase", "not finite".into())
                } else if !(in_range(offset + amplitude.abs()) && in_range(offset - amplitude.abs())) {
                    bad("amplitude", format!("offset {offset} +/- {amplitude} leaves [-1, 1]"))
                } else {
                    Ok(())
                }
            }
            Schedule::Ramp { from, to, t0, t1 } => {
                if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
                    bad("t1", format!("need finite t0 < t1, got {t0}, {t1}"))
                } else if !in_range(*from) {
                    bad("from", format!("{from} outside [-1, 1]"))
                } else if !in_range(*to) {
                    bad("to", format!("{to} outside [-1, 1]"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Kinematic,
    Dynamic,
}

/// A complete simulation run description.
///
/// The initial state is always given at the centre of mass; the kinematic
/// model moves it to the rear axle and uses `v_x` as its speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub duration: f64,
    pub dt: f64,
    pub throttle: Schedule,
    pub steering: Schedule,
    #[serde(default)]
    pub initial: DynamicState,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub slip_model: SlipModel,
    /// Emit motion-capture pose columns when synthesizing a log.
    #[serde(default)]
    pub mocap: bool,
}

impl Scenario {
    pub fn new(name: &str, duration: f64, dt: f64, throttle: Schedule, steering: Schedule, model: ModelKind) -> Self {
        Self {
            name: name.to_string(),
            duration,
            dt,
            throttle,
            steering,
            initial: DynamicState::default(),
            model,
            slip_model: SlipModel::default(),
            mocap: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |path: &str, reason: String| Err(SimError::InvalidScenario { path: path.into(), reason });
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration", format!("{} must be > 0", self.duration));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return bad("dt", format!("{} must lie in (0, {MAX_DT}]", self.dt));
        }
        if self.initial.to_array().iter().any(|v| !v.is_finite()) {
            return bad("initial", "state must be finite".into());
        }
        self.throttle.validate("throttle")?;
        self.steering.validate("steering")
    }

    /// Number of recorded samples, including `t = 0`.
    pub fn samples(&self) -> usize {
        (self.duration / self.dt).round() as usize + 1
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| SimError::InvalidScenario { path: format!("line {} column {}", e.line(), e.column()), reason: e.to_string() })?;
        s.validate()?;
        Ok(s)
    }
}
