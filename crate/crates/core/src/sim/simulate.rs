use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::models::{
    dynamic_rhs, kinematic_rhs, steering_angle, ControlInput, DynamicState, KinematicState, SlipModel,
    VehicleParams,
};
use crate::sysid::log::{format_value, LogError, Mocap, RawLog};

use super::delay_line::DelayLine;
use super::integrate::rk4_step;
use super::scenario::{ModelKind, Scenario};
use super::SimError;

/// Any state component beyond this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Below this `v_x` the dynamic model with normalized slip follows the kinematic model (m/s).
pub const BLEND_SPEED: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub enum StateSeries {
    Kinematic(Vec<KinematicState>),
    Dynamic(Vec<DynamicState>),
}

impl StateSeries {
    fn len(&self) -> usize {
        match self {
            StateSeries::Kinematic(v) => v.len(),
            StateSeries::Dynamic(v) => v.len(),
        }
    }
}

/// Sampled simulation output. Sample `k` holds the state at `t[k]` and the
/// inputs held over `[t[k], t[k] + dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub t: Vec<f64>,
    pub commanded: Vec<ControlInput>,
    pub applied: Vec<ControlInput>,
    /// Steering angle from the applied steering input (rad).
    pub delta: Vec<f64>,
    pub states: StateSeries,
    /// Rear-axle to centre-of-mass distance used for pose conversion.
    pub l_r: f64,
    pub l: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn model(&self) -> ModelKind {
        match self.states {
            StateSeries::Kinematic(_) => ModelKind::Kinematic,
            StateSeries::Dynamic(_) => ModelKind::Dynamic,
        }
    }

    /// Centre-of-mass pose `(x, y, eta)` at sample `k`.
    pub fn com_pose(&self, k: usize) -> (f64, f64, f64) {
        match &self.states {
            StateSeries::Kinematic(s) => {
                let s = s[k];
                (s.x + self.l_r * s.eta.cos(), s.y + self.l_r * s.eta.sin(), s.eta)
            }
            StateSeries::Dynamic(s) => (s[k].x, s[k].y, s[k].eta),
        }
    }

    /// Longitudinal speed as seen by the wheel encoder.
    pub fn encoder_speed(&self, k: usize) -> f64 {
        match &self.states {
            StateSeries::Kinematic(s) => s[k].v,
            StateSeries::Dynamic(s) => s[k].v_x,
        }
    }

    /// Yaw rate as seen by the IMU.
    pub fn yaw_rate(&self, k: usize) -> f64 {
        match &self.states {
            StateSeries::Kinematic(s) => s[k].v * self.delta[k].tan() / self.l,
            StateSeries::Dynamic(s) => s[k].omega,
        }
    }

    /// Writes the log columns followed by applied inputs and raw state.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), LogError> {
        let mut w = csv::Writer::from_writer(writer);
        let state_cols: &[&str] = match self.states {
            StateSeries::Kinematic(_) => &["state_x", "state_y", "state_eta", "state_v"],
            StateSeries::Dynamic(_) => &["state_x", "state_y", "state_eta", "state_v_x", "state_v_y", "state_omega"],
        };
        let mut header = vec!["t", "tau", "s", "v_enc", "omega_imu", "x_t", "y_t", "eta_t", "tau_applied", "s_applied", "delta"];
        header.extend_from_slice(state_cols);
        w.write_record(&header)?;
        for k in 0..self.len() {
            let (x, y, eta) = self.com_pose(k);
            let mut row = vec![
                self.t[k],
                self.commanded[k].tau,
                self.commanded[k].s,
                self.encoder_speed(k),
                self.yaw_rate(k),
                x,
                y,
                eta,
                self.applied[k].tau,
                self.applied[k].s,
                self.delta[k],
            ];
            match &self.states {
                StateSeries::Kinematic(s) => row.extend(s[k].to_array()),
                StateSeries::Dynamic(s) => row.extend(s[k].to_array()),
            }
            w.write_record(row.into_iter().map(format_value))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn guard<const N: usize>(y: &[f64; N], t: f64) -> Result<(), SimError> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFinite { t });
    }
    match y.iter().position(|v| v.abs() > DIVERGENCE_LIMIT) {
        Some(i) => Err(SimError::Diverged { t, component: i, value: y[i] }),
        None => Ok(()),
    }
}

enum Stepper {
    Kinematic(KinematicState, Vec<KinematicState>),
    Dynamic(DynamicState, Vec<DynamicState>),
}

/// Runs a scenario. On divergence the error carries the trajectory up to
/// the last good sample.
pub fn simulate(scenario: &Scenario, params: &VehicleParams) -> Result<Trajectory, SimError> {
    scenario.validate()?;
    params.validate()?;
    let g = params.geometry;
    let dt = scenario.dt;
    let n = scenario.samples();

    let mut steer_line = DelayLine::new(params.delays.steer_delay, dt, scenario.steering.value(0.0))?;
    let mut long_line = DelayLine::new(params.delays.long_delay, dt, scenario.throttle.value(0.0))?;

    let init = scenario.initial;
    let mut stepper = match scenario.model {
        ModelKind::Kinematic => {
            let (s, c) = init.eta.sin_cos();
            let k = KinematicState { x: init.x - g.l_r * c, y: init.y - g.l_r * s, eta: init.eta, v: init.v_x };
            Stepper::Kinematic(k, Vec::with_capacity(n))
        }
        ModelKind::Dynamic => Stepper::Dynamic(init, Vec::with_capacity(n)),
    };

    let mut traj = Trajectory {
        dt,
        t: Vec::with_capacity(n),
        commanded: Vec::with_capacity(n),
        applied: Vec::with_capacity(n),
        delta: Vec::with_capacity(n),
        states: StateSeries::Kinematic(Vec::new()),
        l_r: g.l_r,
        l: g.l,
    };

    let mut failure = None;
    for k in 0..n {
        let t = k as f64 * dt;
        let cmd = ControlInput { tau: scenario.throttle.value(t), s: scenario.steering.value(t) };
        let applied = ControlInput { tau: long_line.push_pop(cmd.tau), s: steer_line.push_pop(cmd.s) };
        let delta = steering_angle(applied.s, &params.steering);
        traj.t.push(t);
        traj.commanded.push(cmd);
        traj.applied.push(applied);
        traj.delta.push(delta);
        let last = k + 1 == n;

        let step = match &mut stepper {
            Stepper::Kinematic(state, out) => {
                out.push(*state);
                if last {
                    Ok(())
                } else {
                    rk4_step(
                        |y: &[f64; 4]| {
                            let s = KinematicState::from_array(*y);
                            Ok(kinematic_rhs(&s, delta, params.longitudinal_force(applied.tau, s.v), &g)?)
                        },
                        &state.to_array(),
                        t,
                        dt,
                    )
                    .and_then(|y| guard(&y, t + dt).map(|_| *state = KinematicState::from_array(y)))
                }
            }
            Stepper::Dynamic(state, out) => {
                out.push(*state);
                if last {
                    Ok(())
                } else {
                    dynamic_step(state, delta, applied.tau, params, scenario.slip_model, t, dt)
                }
            }
        };
        if let Err(e) = step {
            failure = Some(e);
            break;
        }
    }

    traj.states = match stepper {
        Stepper::Kinematic(_, v) => StateSeries::Kinematic(v),
        Stepper::Dynamic(_, v) => StateSeries::Dynamic(v),
    };
    debug_assert_eq!(traj.states.len(), traj.len());
    match failure {
        Some(cause) => Err(SimError::Aborted { cause: Box::new(cause), partial: Box::new(traj) }),
        None => Ok(traj),
    }
}

fn dynamic_step(
    state: &mut DynamicState,
    delta: f64,
    tau: f64,
    params: &VehicleParams,
    slip: SlipModel,
    t: f64,
    dt: f64,
) -> Result<(), SimError> {
    let g = params.geometry;
    let blended = slip == SlipModel::Normalized && state.v_x < BLEND_SPEED;
    let y = if blended {
        // Kinematic motion expressed in dynamic-model states: the rear axle
        // does not slip, so v_y = l_r omega and omega = v_x tan(delta) / l.
        let kin = |s: &mut DynamicState| {
            s.omega = s.v_x * delta.tan() / g.l;
            s.v_y = g.l_r * s.omega;
        };
        let mut start = *state;
        kin(&mut start);
        let y = rk4_step(
            |y: &[f64; 6]| {
                let mut s = DynamicState::from_array(*y);
                kin(&mut s);
                let (se, ce) = s.eta.sin_cos();
                Ok([
                    s.v_x * ce - s.v_y * se,
                    s.v_x * se + s.v_y * ce,
                    s.omega,
                    params.longitudinal_force(tau, s.v_x) / g.m,
                    0.0,
                    0.0,
                ])
            },
            &start.to_array(),
            t,
            dt,
        )?;
        let mut s = DynamicState::from_array(y);
        kin(&mut s);
        s.to_array()
    } else {
        rk4_step(
            |y: &[f64; 6]| {
                let s = DynamicState::from_array(*y);
                Ok(dynamic_rhs(&s, delta, params.longitudinal_force(tau, s.v_x), params, slip)?)
            },
            &state.to_array(),
            t,
            dt,
        )?
    };
    guard(&y, t + dt)?;
    *state = DynamicState::from_array(y);
    Ok(())
}

/// Standard deviations of additive Gaussian sensor noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub v_enc: f64,
    #[serde(default)]
    pub omega_imu: f64,
    #[serde(default)]
    pub mocap_x: f64,
    #[serde(default)]
    pub mocap_y: f64,
    #[serde(default)]
    pub mocap_eta: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless(seed: u64) -> Self {
        Self { v_enc: 0.0, omega_imu: 0.0, mocap_x: 0.0, mocap_y: 0.0, mocap_eta: 0.0, seed }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("v_enc", self.v_enc),
            ("omega_imu", self.omega_imu),
            ("mocap_x", self.mocap_x),
            ("mocap_y", self.mocap_y),
            ("mocap_eta", self.mocap_eta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::InvalidNoise { channel: name, value: v });
            }
        }
        Ok(())
    }
}

/// Samples a trajectory into a log the way the robot records it: commanded
/// inputs, noisy encoder speed and yaw rate, and optionally the noisy
/// centre-of-mass pose.
///
/// Noise is drawn per sample in the order v, omega, then x, y, eta when
/// mocap is recorded; draws happen even for zero deviations so the stream
/// does not depend on which channels are noisy.
pub fn sample_log(traj: &Trajectory, noise: &NoiseSpec, mocap: bool) -> Result<RawLog, SimError> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut draw = |sd: f64| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
    let n = traj.len();
    let (mut v, mut w) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut pose = Mocap { x: Vec::new(), y: Vec::new(), eta: Vec::new() };
    for k in 0..n {
        v.push(traj.encoder_speed(k) + draw(noise.v_enc));
        w.push(traj.yaw_rate(k) + draw(noise.omega_imu));
        if mocap {
            let (x, y, eta) = traj.com_pose(k);
            pose.x.push(x + draw(noise.mocap_x));
            pose.y.push(y + draw(noise.mocap_y));
            pose.eta.push(eta + draw(noise.mocap_eta));
        }
    }
    Ok(RawLog::new(
        traj.t.clone(),
        traj.commanded.iter().map(|c| c.tau).collect(),
        traj.commanded.iter().map(|c| c.s).collect(),
        v,
        w,
        mocap.then_some(pose),
    )?)
}

/// Simulates `scenario` and samples the result with `noise`.
pub fn synthesize_log(scenario: &Scenario, params: &VehicleParams, noise: &NoiseSpec) -> Result<RawLog, SimError> {
    noise.validate()?;
    let traj = simulate(scenario, params)?;
    sample_log(&traj, noise, scenario.mocap)
}
