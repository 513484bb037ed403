use super::{FrictionParams, MotorParams, SteeringParams, TireParams};

/// Sharpness of the smooth `max(0, x)` used for the throttle dead zone.
pub const THROTTLE_SHARPNESS: f64 = 100.0;
/// Sharpness of the left/right blend weight in the steering map.
pub const STEERING_BLEND_SHARPNESS: f64 = 30.0;

fn sech2(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

/// Friction force opposing motion at longitudinal speed `v`.
pub fn friction_force(v: f64, p: &FrictionParams) -> f64 {
    -(p.a * (p.b * v).tanh() + v * p.c)
}

pub fn friction_force_dv(v: f64, p: &FrictionParams) -> f64 {
    -(p.a * p.b * sech2(p.b * v) + p.c)
}

/// Continuously differentiable stand-in for `max(0, tau + g)`.
pub fn smooth_positive_throttle(tau: f64, g: f64) -> f64 {
    let x = tau + g;
    x * 0.5 * ((THROTTLE_SHARPNESS * x).tanh() + 1.0)
}

/// Derivative of [`smooth_positive_throttle`] with respect to `tau + g`.
pub fn smooth_positive_throttle_dx(tau: f64, g: f64) -> f64 {
    let x = tau + g;
    0.5 * ((THROTTLE_SHARPNESS * x).tanh() + 1.0) + x * 0.5 * THROTTLE_SHARPNESS * sech2(THROTTLE_SHARPNESS * x)
}

pub fn motor_force(tau: f64, v: f64, p: &MotorParams) -> f64 {
    (p.d - v * p.e) * smooth_positive_throttle(tau, p.g)
}

pub fn motor_force_dtau(tau: f64, v: f64, p: &MotorParams) -> f64 {
    (p.d - v * p.e) * smooth_positive_throttle_dx(tau, p.g)
}

pub fn motor_force_dv(tau: f64, _v: f64, p: &MotorParams) -> f64 {
    -p.e * smooth_positive_throttle(tau, p.g)
}

/// Steering angle (rad) produced by normalized steering input `s`.
pub fn steering_angle(s: f64, p: &SteeringParams) -> f64 {
    let u = s + p.c_t;
    let w = 0.5 * ((STEERING_BLEND_SHARPNESS * u).tanh() + 1.0);
    w * p.a_t * (p.b_t * u).tanh() + (1.0 - w) * p.d_t * (p.e_t * u).tanh()
}

pub fn steering_angle_ds(s: f64, p: &SteeringParams) -> f64 {
    let u = s + p.c_t;
    let w = 0.5 * ((STEERING_BLEND_SHARPNESS * u).tanh() + 1.0);
    let dw = 0.5 * STEERING_BLEND_SHARPNESS * sech2(STEERING_BLEND_SHARPNESS * u);
    let left = p.a_t * (p.b_t * u).tanh();
    let right = p.d_t * (p.e_t * u).tanh();
    dw * (left - right)
        + w * p.a_t * p.b_t * sech2(p.b_t * u)
        + (1.0 - w) * p.d_t * p.e_t * sech2(p.e_t * u)
}

/// Pacejka magic formula for the front lateral tire force.
pub fn pacejka_lateral(alpha: f64, p: &TireParams) -> f64 {
    let z = p.b * alpha;
    let h = z - p.e * (z - z.atan());
    p.d * (p.c * h.atan()).sin()
}

pub fn pacejka_lateral_dalpha(alpha: f64, p: &TireParams) -> f64 {
    let z = p.b * alpha;
    let h = z - p.e * (z - z.atan());
    let dh_dz = 1.0 - p.e * (1.0 - 1.0 / (1.0 + z * z));
    p.d * (p.c * h.atan()).cos() * p.c / (1.0 + h * h) * dh_dz * p.b
}

/// Linear rear lateral tire force.
pub fn rear_lateral(alpha: f64, c_r: f64) -> f64 {
    c_r * alpha
}
