//! Vehicle model building blocks: parameter groups, state vectors, the
//! empirical sub-model curves and the kinematic/dynamic bicycle ODEs.
//!
//! Everything here is a pure function of its arguments.

mod bicycle;
mod curves;

pub use bicycle::{
    body_frame_velocity, dynamic_rhs, kinematic_rhs, rectangle_inertia, slip_angles, SlipModel,
    DEFAULT_SLIP_EPSILON,
};
pub use curves::{
    friction_force, friction_force_dv, motor_force, motor_force_dtau, motor_force_dv,
    pacejka_lateral, pacejka_lateral_dalpha, rear_lateral, smooth_positive_throttle,
    smooth_positive_throttle_dx, steering_angle, steering_angle_ds, STEERING_BLEND_SHARPNESS,
    THROTTLE_SHARPNESS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("steering angle {0} rad is at or beyond the tan singularity (|delta| >= pi/2)")]
    SteeringSingularity(f64),
    #[error("longitudinal speed v_x = {v_x} m/s is too small for normalized slip angles (epsilon {epsilon})")]
    DegenerateSpeed { v_x: f64, epsilon: f64 },
    #[error("non-positive input to {0}")]
    Domain(&'static str),
}

fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<(), ModelError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, value, reason })
    }
}

/// Friction curve `F_f(v) = -(a tanh(b v) + c v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionParams {
    /// Coulomb-like force scale (N).
    pub a: f64,
    /// Sharpness of the sign transition (s/m).
    pub b: f64,
    /// Viscous coefficient (N s/m).
    pub c: f64,
}

impl FrictionParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check(self.a > 0.0, "friction.a", self.a, "must be > 0")?;
        check(self.b > 0.0, "friction.b", self.b, "must be > 0")?;
        check(self.c >= 0.0, "friction.c", self.c, "must be >= 0")
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.a, self.b, self.c]
    }

    pub fn from_slice(p: &[f64]) -> Self {
        Self { a: p[0], b: p[1], c: p[2] }
    }
}

/// Brushed-motor curve `F_m = (d - v e) * tau~(tau + g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    /// Stall force scale (N).
    pub d: f64,
    /// Back-EMF slope (N s/m).
    pub e: f64,
    /// Throttle dead-zone offset; the throttle must exceed `-g` to produce force.
    pub g: f64,
}

impl MotorParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check(self.d > 0.0, "motor.d", self.d, "must be > 0")?;
        check(self.e > 0.0, "motor.e", self.e, "must be > 0")?;
        check(self.g > -1.0 && self.g <= 0.0, "motor.g", self.g, "must lie in (-1, 0]")
    }

    /// Speed at which the motor stops producing force.
    pub fn no_load_speed(&self) -> f64 {
        self.d / self.e
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.d, self.e, self.g]
    }

    pub fn from_slice(p: &[f64]) -> Self {
        Self { d: p[0], e: p[1], g: p[2] }
    }
}

/// Static map from normalized steering input to steering angle: a blend of
/// two tanh curves, one per steering direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringParams {
    pub a_t: f64,
    pub b_t: f64,
    pub c_t: f64,
    pub d_t: f64,
    pub e_t: f64,
}

impl SteeringParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check(self.a_t > 0.0, "steering.a_t", self.a_t, "must be > 0")?;
        check(self.b_t > 0.0, "steering.b_t", self.b_t, "must be > 0")?;
        check(self.c_t.abs() < 1.0, "steering.c_t", self.c_t, "must satisfy |c_t| < 1")?;
        check(self.d_t > 0.0, "steering.d_t", self.d_t, "must be > 0")?;
        check(self.e_t > 0.0, "steering.e_t", self.e_t, "must be > 0")
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.a_t, self.b_t, self.c_t, self.d_t, self.e_t]
    }

    pub fn from_slice(p: &[f64]) -> Self {
        Self { a_t: p[0], b_t: p[1], c_t: p[2], d_t: p[3], e_t: p[4] }
    }
}

/// Front Pacejka coefficients plus the rear linear cornering coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TireParams {
    /// Peak force (N).
    #[serde(rename = "D")]
    pub d: f64,
    /// Shape factor.
    #[serde(rename = "C")]
    pub c: f64,
    /// Stiffness factor (1/rad).
    #[serde(rename = "B")]
    pub b: f64,
    /// Curvature factor.
    #[serde(rename = "E")]
    pub e: f64,
    /// Rear linear cornering coefficient (N/rad).
    #[serde(rename = "C_r")]
    pub c_r: f64,
}

impl TireParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check(self.d > 0.0, "tire.D", self.d, "must be > 0")?;
        check(self.c > 0.0, "tire.C", self.c, "must be > 0")?;
        check(self.b > 0.0, "tire.B", self.b, "must be > 0")?;
        check(self.e.is_finite(), "tire.E", self.e, "must be finite")?;
        check(self.c_r > 0.0, "tire.C_r", self.c_r, "must be > 0")
    }

    /// Front Pacejka coefficients in `[D, C, B, E]` order.
    pub fn front_vec(&self) -> Vec<f64> {
        vec![self.d, self.c, self.b, self.e]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Mass (kg).
    pub m: f64,
    /// Wheelbase (m).
    pub l: f64,
    /// Centre of mass to front axle (m).
    pub l_f: f64,
    /// Centre of mass to rear axle (m).
    pub l_r: f64,
    /// Width (m).
    pub w: f64,
    /// Yaw inertia (kg m^2).
    #[serde(rename = "I_z")]
    pub i_z: f64,
}

impl Geometry {
    /// Geometry with the centre of mass at mid-wheelbase and the yaw inertia of
    /// a uniform `l x w` rectangle.
    pub fn uniform(m: f64, l: f64, w: f64) -> Result<Self, ModelError> {
        let i_z = rectangle_inertia(m, l, w)?;
        Ok(Self { m, l, l_f: l / 2.0, l_r: l / 2.0, w, i_z })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check(self.m > 0.0, "geometry.m", self.m, "must be > 0")?;
        check(self.l > 0.0, "geometry.l", self.l, "must be > 0")?;
        check(self.l_f > 0.0, "geometry.l_f", self.l_f, "must be > 0")?;
        check(self.l_r > 0.0, "geometry.l_r", self.l_r, "must be > 0")?;
        check(
            (self.l_f + self.l_r - self.l).abs() <= 1e-9 * self.l.max(1.0),
            "geometry.l",
            self.l,
            "must equal l_f + l_r",
        )?;
        check(self.w > 0.0, "geometry.w", self.w, "must be > 0")?;
        check(self.i_z > 0.0, "geometry.I_z", self.i_z, "must be > 0")
    }
}

/// Actuation delays in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delays {
    pub steer_delay: f64,
    pub long_delay: f64,
}

impl Delays {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = |d: f64| (0.0..1.0).contains(&d);
        check(ok(self.steer_delay), "delays.steer_delay", self.steer_delay, "must lie in [0, 1) s")?;
        check(ok(self.long_delay), "delays.long_delay", self.long_delay, "must lie in [0, 1) s")
    }
}

impl Default for Delays {
    /// Steering delay unknown until estimated; longitudinal delay is taken as
    /// the negligible 0.01 s measured on the bench.
    fn default() -> Self {
        Self { steer_delay: 0.0, long_delay: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub friction: FrictionParams,
    pub motor: MotorParams,
    pub steering: SteeringParams,
    pub tire: TireParams,
    pub geometry: Geometry,
    pub delays: Delays,
}

/// Wheelbase reproducing the reference yaw inertia for m = 1.67 kg,
/// w = 0.1 m under the uniform-rectangle assumption.
pub const REFERENCE_WHEELBASE: f64 = 0.192;

impl VehicleParams {
    /// Identified values for the 1:10 reference platform.
    pub fn reference() -> Self {
        let l = REFERENCE_WHEELBASE;
        Self {
            friction: FrictionParams { a: 1.72, b: 13.32, c: 0.29 },
            motor: MotorParams { d: 28.88, e: 5.99, g: -0.15 },
            steering: SteeringParams { a_t: 1.64, b_t: 0.33, c_t: 0.02, d_t: 1.66, e_t: 0.38 },
            tire: TireParams { d: 2.98, c: 0.69, b: 0.29, e: -3.07, c_r: 0.39 },
            geometry: Geometry { m: 1.67, l, l_f: l / 2.0, l_r: l / 2.0, w: 0.1, i_z: 0.006513 },
            delays: Delays { steer_delay: 0.15, long_delay: 0.01 },
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.friction.validate()?;
        self.motor.validate()?;
        self.steering.validate()?;
        self.tire.validate()?;
        self.geometry.validate()?;
        self.delays.validate()
    }

    /// Total longitudinal force `F_m + F_f` at throttle `tau` and speed `v`.
    pub fn longitudinal_force(&self, tau: f64, v: f64) -> f64 {
        motor_force(tau, v, &self.motor) + friction_force(v, &self.friction)
    }
}

/// Normalized actuator commands, both in `[-1, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub tau: f64,
    pub s: f64,
}

impl ControlInput {
    pub fn validate(&self) -> Result<(), ModelError> {
        check((-1.0..=1.0).contains(&self.tau), "input.tau", self.tau, "must lie in [-1, 1]")?;
        check((-1.0..=1.0).contains(&self.s), "input.s", self.s, "must lie in [-1, 1]")
    }
}

/// Rear-axle pose, heading and longitudinal speed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub x: f64,
    pub y: f64,
    /// Unwrapped heading (rad).
    pub eta: f64,
    pub v: f64,
}

impl KinematicState {
    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.eta, self.v]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { x: a[0], y: a[1], eta: a[2], v: a[3] }
    }
}

/// Centre-of-mass pose plus body-frame velocities and yaw rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DynamicState {
    pub x: f64,
    pub y: f64,
    /// Unwrapped heading (rad).
    pub eta: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub omega: f64,
}

impl DynamicState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.eta, self.v_x, self.v_y, self.omega]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { x: a[0], y: a[1], eta: a[2], v_x: a[3], v_y: a[4], omega: a[5] }
    }
}
