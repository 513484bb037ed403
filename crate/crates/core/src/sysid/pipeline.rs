//! Staged identification: friction, motor, steering map, steering delay, tires.
//!
//! Each stage consumes the results of the stages before it. A stage whose
//! experiment data is absent is reported as skipped; a stage whose
//! prerequisite did not complete is reported as failed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::models::{
    steering_angle, Delays, FrictionParams, Geometry, ModelError, MotorParams, SteeringParams,
    TireParams, VehicleParams,
};

use super::builders::{
    build_friction_dataset, build_motor_dataset, build_steering_dataset, build_tire_dataset,
    estimate_steering_angle_series, PrepOptions,
};
use super::curves::{Curve, CurveObjective, FrictionCurve, MotorCurve, PacejkaCurve, RearLinearCurve, SteeringCurve};
use super::dataset::Dataset;
use super::delay::{estimate_delay_xcorr, DEFAULT_MAX_DELAY};
use super::log::RawLog;
use super::optim::{adam_fit, FitConfig, FitResult};
use super::signal::smooth;
use super::SysIdError;

pub const PARAMS_SCHEMA_VERSION: u32 = 1;

/// Kind of driving experiment a log was recorded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Launch, then zero throttle until the car rolls to a stop.
    Coast,
    /// Throttle steps from rest at zero steering, followed by coasting.
    Step,
    /// Constant steering inputs at constant throttle.
    Steer,
    /// Low-frequency sinusoidal steering at constant throttle.
    Sine,
    /// Constant steering with a slowly increasing speed, recorded with motion capture.
    Mocap,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::Coast, Experiment::Step, Experiment::Steer, Experiment::Sine, Experiment::Mocap];

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Coast => "coast",
            Experiment::Step => "step",
            Experiment::Steer => "steer",
            Experiment::Sine => "sine",
            Experiment::Mocap => "mocap",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown experiment type `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedLog {
    pub name: String,
    pub experiment: Experiment,
    pub log: RawLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Friction,
    Motor,
    Steering,
    Delay,
    Tire,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Friction, Stage::Motor, Stage::Steering, Stage::Delay, Stage::Tire];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Friction => "friction",
            Stage::Motor => "motor",
            Stage::Steering => "steering",
            Stage::Delay => "delay",
            Stage::Tire => "tire",
        }
    }

    /// Experiments whose logs feed this stage.
    pub fn experiments(&self) -> &'static [Experiment] {
        match self {
            Stage::Friction => &[Experiment::Coast, Experiment::Step],
            Stage::Motor => &[Experiment::Step],
            Stage::Steering => &[Experiment::Steer],
            Stage::Delay => &[Experiment::Sine],
            Stage::Tire => &[Experiment::Mocap],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// Fitted parameter groups as written to disk. Groups whose stage did not
/// complete are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    pub schema_version: u32,
    pub friction: Option<FrictionParams>,
    pub motor: Option<MotorParams>,
    pub steering: Option<SteeringParams>,
    pub tire: Option<TireParams>,
    pub geometry: Geometry,
    pub delays: Delays,
}

impl ParamsDocument {
    pub fn from_params(p: &VehicleParams) -> Self {
        Self {
            schema_version: PARAMS_SCHEMA_VERSION,
            friction: Some(p.friction),
            motor: Some(p.motor),
            steering: Some(p.steering),
            tire: Some(p.tire),
            geometry: p.geometry,
            delays: p.delays,
        }
    }

    /// Complete parameter set, or the name of the first missing group.
    pub fn to_vehicle_params(&self) -> Result<VehicleParams, ParamsDocumentError> {
        if self.schema_version != PARAMS_SCHEMA_VERSION {
            return Err(ParamsDocumentError::SchemaVersion(self.schema_version));
        }
        let missing = ParamsDocumentError::MissingGroup;
        let p = VehicleParams {
            friction: self.friction.ok_or(missing("friction"))?,
            motor: self.motor.ok_or(missing("motor"))?,
            steering: self.steering.ok_or(missing("steering"))?,
            tire: self.tire.ok_or(missing("tire"))?,
            geometry: self.geometry,
            delays: self.delays,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParamsDocumentError {
    #[error("unsupported schema_version {0} (expected {PARAMS_SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("parameter group `{0}` is absent")]
    MissingGroup(&'static str),
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

/// Default start point and bounds for each fitted curve.
pub fn default_fit_config(curve: &str) -> FitConfig {
    match curve {
        "friction" => FitConfig::new(vec![1.0, 10.0, 0.1], vec![(0.01, 10.0), (0.1, 50.0), (0.0, 5.0)]),
        "motor" => FitConfig::new(vec![20.0, 5.0, -0.1], vec![(0.1, 100.0), (0.01, 30.0), (-0.99, 0.0)]),
        "steering" => FitConfig::new(
            vec![1.0, 1.0, 0.0, 1.0, 1.0],
            vec![(0.01, 5.0), (0.01, 5.0), (-0.5, 0.5), (0.01, 5.0), (0.01, 5.0)],
        ),
        "tire_front" => FitConfig::new(
            vec![3.0, 1.0, 1.0, 0.0],
            vec![(0.01, 20.0), (0.01, 5.0), (0.01, 20.0), (-20.0, 1.0)],
        ),
        "tire_rear" => FitConfig::new(vec![1.0], vec![(0.001, 50.0)]),
        other => panic!("no default fit configuration for `{other}`"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub geometry: Geometry,
    pub prep: PrepOptions,
    pub stages: Vec<Stage>,
    pub friction: FitConfig,
    pub motor: FitConfig,
    pub steering: FitConfig,
    pub tire_front: FitConfig,
    pub tire_rear: FitConfig,
    /// Longitudinal delay written to the output; it has no in-log estimator.
    pub long_delay: f64,
    /// Steering delay used when the delay stage does not run.
    pub fallback_steer_delay: f64,
    pub max_delay: f64,
}

impl PipelineConfig {
    pub fn new(geometry: Geometry) -> Self {
        Self {
            geometry,
            prep: PrepOptions::default(),
            stages: Stage::ALL.to_vec(),
            friction: default_fit_config("friction"),
            motor: default_fit_config("motor"),
            steering: default_fit_config("steering"),
            tire_front: default_fit_config("tire_front"),
            tire_rear: default_fit_config("tire_rear"),
            long_delay: Delays::default().long_delay,
            fallback_steer_delay: 0.0,
            max_delay: DEFAULT_MAX_DELAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    Skipped { reason: String },
    Failed { reason: String },
}

/// Summary of one optimizer run inside a stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub curve: String,
    pub param_names: Vec<String>,
    pub rows: usize,
    #[serde(flatten)]
    pub result: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    #[serde(flatten)]
    pub status: StageStatus,
    pub fits: Vec<FitSummary>,
    pub warnings: Vec<String>,
    /// Estimated delay for the delay stage (s).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
}

impl StageReport {
    fn new(stage: Stage, status: StageStatus) -> Self {
        Self { stage, status, fits: Vec::new(), warnings: Vec::new(), estimate: None }
    }

    pub fn completed(&self) -> bool {
        self.status == StageStatus::Completed
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub params: ParamsDocument,
    pub stages: Vec<StageReport>,
    /// Datasets each curve was fitted on, keyed by curve name.
    pub datasets: BTreeMap<String, Dataset>,
}

impl PipelineOutcome {
    pub fn stage(&self, stage: Stage) -> Option<&StageReport> {
        self.stages.iter().find(|r| r.stage == stage)
    }

    /// `true` when every requested stage completed.
    pub fn all_completed(&self) -> bool {
        self.stages.iter().all(StageReport::completed)
    }
}

fn fit_curve<C: Curve>(curve: C, data: &Dataset, config: &FitConfig) -> Result<FitSummary, SysIdError> {
    let names = curve.param_names().iter().map(|s| s.to_string()).collect();
    let name = curve.name().to_string();
    let objective = CurveObjective::new(curve, data);
    let result = adam_fit(&objective, config)?;
    Ok(FitSummary { curve: name, param_names: names, rows: data.len(), result })
}

/// Fit a single sub-model directly from a dataset.
pub fn fit_friction(data: &Dataset, config: &FitConfig) -> Result<(FrictionParams, FitSummary), SysIdError> {
    let s = fit_curve(FrictionCurve, data, config)?;
    Ok((FrictionParams::from_slice(&s.result.params), s))
}

pub fn fit_motor(data: &Dataset, config: &FitConfig) -> Result<(MotorParams, FitSummary), SysIdError> {
    let s = fit_curve(MotorCurve, data, config)?;
    Ok((MotorParams::from_slice(&s.result.params), s))
}

pub fn fit_steering(data: &Dataset, config: &FitConfig) -> Result<(SteeringParams, FitSummary), SysIdError> {
    let s = fit_curve(SteeringCurve, data, config)?;
    Ok((SteeringParams::from_slice(&s.result.params), s))
}

/// Fits the front Pacejka curve and the rear linear coefficient.
pub fn fit_tires(
    front: &Dataset,
    rear: &Dataset,
    front_config: &FitConfig,
    rear_config: &FitConfig,
) -> Result<(TireParams, [FitSummary; 2]), SysIdError> {
    let f = fit_curve(PacejkaCurve, front, front_config)?;
    let r = fit_curve(RearLinearCurve, rear, rear_config)?;
    let p = &f.result.params;
    let tire = TireParams { d: p[0], c: p[1], b: p[2], e: p[3], c_r: r.result.params[0] };
    Ok((tire, [f, r]))
}

/// Steering delay from sinusoidal-steering logs: cross-correlates the mapped
/// command `delta(s)` with the angle inferred from yaw rate and speed.
/// Each log contributes its longest stretch above `v_min`; the median over
/// logs is returned.
pub fn estimate_steering_delay(
    logs: &[&RawLog],
    steering: &SteeringParams,
    l: f64,
    prep: &PrepOptions,
    max_delay: f64,
) -> Result<f64, SysIdError> {
    let mut estimates = Vec::new();
    for log in logs {
        let window = prep.smooth_window.min(if log.len().is_multiple_of(2) { log.len() - 1 } else { log.len() });
        let v = smooth(&log.v_enc, window)?;
        let measured = estimate_steering_angle_series(&log.omega_imu, &v, l, prep.v_min)?;
        let (mut best, mut cur) = ((0, 0), None::<usize>);
        for i in 0..=measured.len() {
            let ok = i < measured.len() && measured[i].is_some();
            match (ok, cur) {
                (true, None) => cur = Some(i),
                (false, Some(s)) => {
                    if i - s > best.1 - best.0 {
                        best = (s, i);
                    }
                    cur = None;
                }
                _ => {}
            }
        }
        let (a, b) = best;
        if b - a < 10 {
            continue;
        }
        let cmd: Vec<f64> = log.s[a..b].iter().map(|&s| steering_angle(s, steering)).collect();
        let meas: Vec<f64> = measured[a..b].iter().map(|d| d.unwrap_or(0.0)).collect();
        estimates.push(estimate_delay_xcorr(&cmd, &meas, log.mean_dt(), max_delay)?);
    }
    if estimates.is_empty() {
        return Err(SysIdError::NoData("no sinusoidal-steering stretch above v_min"));
    }
    estimates.sort_by(f64::total_cmp);
    Ok(estimates[estimates.len() / 2])
}

/// Runs the requested stages in order on a collection of tagged logs.
pub fn fit_pipeline(logs: &[TaggedLog], config: &PipelineConfig) -> Result<PipelineOutcome, SysIdError> {
    if logs.is_empty() {
        return Err(SysIdError::NoData("no logs supplied"));
    }
    config.geometry.validate().map_err(|e| SysIdError::InvalidConfig(e.to_string()))?;
    let geom = config.geometry;
    let select = |stage: Stage| -> Vec<RawLog> {
        logs.iter().filter(|l| stage.experiments().contains(&l.experiment)).map(|l| l.log.clone()).collect()
    };

    let mut params = ParamsDocument {
        schema_version: PARAMS_SCHEMA_VERSION,
        friction: None,
        motor: None,
        steering: None,
        tire: None,
        geometry: geom,
        delays: Delays { steer_delay: config.fallback_steer_delay, long_delay: config.long_delay },
    };
    let mut reports = Vec::new();
    let mut datasets = BTreeMap::new();

    for stage in Stage::ALL {
        if !config.stages.contains(&stage) {
            continue;
        }
        let stage_logs = select(stage);
        if stage_logs.is_empty() {
            let kinds: Vec<&str> = stage.experiments().iter().map(Experiment::as_str).collect();
            reports.push(StageReport::new(
                stage,
                StageStatus::Skipped { reason: format!("no `{}` logs", kinds.join("`/`")) },
            ));
            continue;
        }
        let prerequisite = match stage {
            Stage::Motor => params.friction.is_none().then_some("friction"),
            Stage::Delay | Stage::Tire => params.steering.is_none().then_some("steering"),
            _ => None,
        };
        if let Some(dep) = prerequisite {
            reports.push(StageReport::new(
                stage,
                StageStatus::Failed { reason: format!("requires the {dep} stage, which did not complete") },
            ));
            continue;
        }

        let mut report = StageReport::new(stage, StageStatus::Completed);
        let outcome: Result<(), SysIdError> = (|| {
            match stage {
                Stage::Friction => {
                    let data = build_friction_dataset(&stage_logs, geom.m, &config.prep)?;
                    let (p, s) = fit_friction(&data, &config.friction)?;
                    params.friction = Some(p);
                    report.fits.push(s);
                    datasets.insert("friction".to_string(), data);
                }
                Stage::Motor => {
                    let friction = params.friction.as_ref().expect("checked above");
                    let data = build_motor_dataset(&stage_logs, geom.m, friction, &config.prep)?;
                    let (p, s) = fit_motor(&data, &config.motor)?;
                    params.motor = Some(p);
                    report.fits.push(s);
                    datasets.insert("motor".to_string(), data);
                }
                Stage::Steering => {
                    let (data, warnings) = build_steering_dataset(&stage_logs, geom.l, &config.prep)?;
                    report.warnings.extend(warnings.into_iter().map(|w| w.message));
                    let (p, s) = fit_steering(&data, &config.steering)?;
                    params.steering = Some(p);
                    report.fits.push(s);
                    datasets.insert("steering".to_string(), data);
                }
                Stage::Delay => {
                    let steering = params.steering.as_ref().expect("checked above");
                    let refs: Vec<&RawLog> = stage_logs.iter().collect();
                    let d = estimate_steering_delay(&refs, steering, geom.l, &config.prep, config.max_delay)?;
                    params.delays.steer_delay = d;
                    report.estimate = Some(d);
                }
                Stage::Tire => {
                    // Only geometry, steering map and delays are read by the builder.
                    let reference = VehicleParams::reference();
                    let vp = VehicleParams {
                        friction: params.friction.unwrap_or(reference.friction),
                        motor: params.motor.unwrap_or(reference.motor),
                        steering: params.steering.expect("checked above"),
                        tire: reference.tire,
                        geometry: geom,
                        delays: params.delays,
                    };
                    let data = build_tire_dataset(&stage_logs, &vp, &config.prep)?;
                    if data.singular_rows > 0 {
                        report.warnings.push(format!("{} near-singular rows dropped", data.singular_rows));
                    }
                    let (p, [f, r]) = fit_tires(&data.front, &data.rear, &config.tire_front, &config.tire_rear)?;
                    params.tire = Some(p);
                    report.fits.push(f);
                    report.fits.push(r);
                    datasets.insert("tire_front".to_string(), data.front);
                    datasets.insert("tire_rear".to_string(), data.rear);
                }
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            report.status = StageStatus::Failed { reason: e.to_string() };
        }
        reports.push(report);
    }

    Ok(PipelineOutcome { params, stages: reports, datasets })
}
