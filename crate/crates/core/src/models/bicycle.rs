use serde::{Deserialize, Serialize};

use super::{
    pacejka_lateral, rear_lateral, DynamicState, Geometry, KinematicState, ModelError,
    VehicleParams,
};

/// Smallest `v_x` accepted by the normalized slip formulation.
pub const DEFAULT_SLIP_EPSILON: f64 = 1e-3;

/// How slip angles are computed from body-frame velocities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlipModel {
    /// `alpha_f = delta - atan(v_y + omega l_f)`, `alpha_r = -atan(v_y - omega l_r)`.
    /// This is the form the reference tire coefficients were fitted with.
    #[default]
    Unnormalized,
    /// Textbook form with the arctan argument divided by `v_x`.
    Normalized,
}

/// Right-hand side of the kinematic bicycle model (rear-axle reference).
///
/// `f_total` is the net longitudinal force `F_m + F_f`.
pub fn kinematic_rhs(
    state: &KinematicState,
    delta: f64,
    f_total: f64,
    geom: &Geometry,
) -> Result<[f64; 4], ModelError> {
    if !(delta.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(ModelError::SteeringSingularity(delta));
    }
    Ok([
        state.v * state.eta.cos(),
        state.v * state.eta.sin(),
        state.v * delta.tan() / geom.l,
        f_total / geom.m,
    ])
}

/// Front and rear slip angles `(alpha_f, alpha_r)`.
pub fn slip_angles(
    state: &DynamicState,
    delta: f64,
    geom: &Geometry,
    model: SlipModel,
) -> Result<(f64, f64), ModelError> {
    let front = state.v_y + state.omega * geom.l_f;
    let rear = state.v_y - state.omega * geom.l_r;
    match model {
        SlipModel::Unnormalized => Ok((delta - front.atan(), -rear.atan())),
        SlipModel::Normalized => {
            if !(state.v_x > DEFAULT_SLIP_EPSILON) {
                return Err(ModelError::DegenerateSpeed { v_x: state.v_x, epsilon: DEFAULT_SLIP_EPSILON });
            }
            Ok((delta - (front / state.v_x).atan(), -(rear / state.v_x).atan()))
        }
    }
}

/// Right-hand side of the dynamic bicycle model (centre-of-mass reference).
///
/// The net longitudinal force `f_x_total` is split equally between the axles
/// and acts along each tire's own axis.
pub fn dynamic_rhs(
    state: &DynamicState,
    delta: f64,
    f_x_total: f64,
    params: &VehicleParams,
    slip: SlipModel,
) -> Result<[f64; 6], ModelError> {
    let g = &params.geometry;
    let (alpha_f, alpha_r) = slip_angles(state, delta, g, slip)?;
    let fx_f = 0.5 * f_x_total;
    let fx_r = 0.5 * f_x_total;
    let fy_f = pacejka_lateral(alpha_f, &params.tire);
    let fy_r = rear_lateral(alpha_r, params.tire.c_r);
    let (sd, cd) = delta.sin_cos();
    let (se, ce) = state.eta.sin_cos();
    let front_lateral = fy_f * cd + fx_f * sd;
    Ok([
        state.v_x * ce - state.v_y * se,
        state.v_x * se + state.v_y * ce,
        state.omega,
        (fx_r + fx_f * cd - fy_f * sd) / g.m + state.omega * state.v_y,
        (fy_r + front_lateral) / g.m - state.omega * state.v_x,
        (g.l_f * front_lateral - g.l_r * fy_r) / g.i_z,
    ])
}

/// Rotates a world-frame velocity into the body frame of a vehicle with heading `eta`.
pub fn body_frame_velocity(v_world: (f64, f64), eta: f64) -> (f64, f64) {
    let (s, c) = (-eta).sin_cos();
    (c * v_world.0 - s * v_world.1, s * v_world.0 + c * v_world.1)
}

/// Yaw inertia of a uniform `l x w` rectangle of mass `m`.
pub fn rectangle_inertia(m: f64, l: f64, w: f64) -> Result<f64, ModelError> {
    if !(m > 0.0 && l > 0.0 && w > 0.0) {
        return Err(ModelError::Domain("rectangle_inertia"));
    }
    Ok(m * (l * l + w * w) / 12.0)
}
