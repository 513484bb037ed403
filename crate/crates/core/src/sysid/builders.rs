//! Dataset construction from raw logs, one builder per sub-model.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::models::{
    body_frame_velocity, friction_force, slip_angles, steering_angle, DynamicState, FrictionParams,
    SlipModel, VehicleParams,
};

use super::dataset::{ColumnInfo, Dataset};
use super::log::RawLog;
use super::signal::{differentiate, smooth};
use super::SysIdError;

/// Preprocessing knobs shared by the dataset builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepOptions {
    /// Moving-average window (samples) applied to encoder speed before differentiation.
    pub smooth_window: usize,
    /// Moving-average window (samples) applied to mocap pose before differentiation.
    pub mocap_smooth_window: usize,
    /// Rows at or below this speed are never used where speed is divided by or inverted (m/s).
    pub v_min: f64,
    /// Time excluded on each side of a command change (s).
    pub settle_time: f64,
    /// Length of the rolling window used to judge steady cornering (s).
    pub steady_window: f64,
    /// A row is steady when the rolling std of yaw rate is below this fraction of its mean.
    pub steady_rel_std: f64,
    pub slip_model: SlipModel,
}

impl Default for PrepOptions {
    fn default() -> Self {
        Self {
            smooth_window: 5,
            mocap_smooth_window: 5,
            v_min: 0.05,
            settle_time: 0.05,
            steady_window: 0.5,
            steady_rel_std: 0.05,
            slip_model: SlipModel::Unnormalized,
        }
    }
}

/// Non-fatal observations made while building a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildWarning {
    pub log_index: usize,
    pub message: String,
}

fn samples(seconds: f64, dt: f64) -> usize {
    if dt > 0.0 {
        (seconds / dt).round() as usize
    } else {
        0
    }
}

/// `true` where `values` is constant over `[i - k, i + k]` (clipped to the series).
fn settled(values: &[f64], k: usize) -> Vec<bool> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(k);
            let hi = (i + k).min(n - 1);
            values[lo..=hi].iter().all(|&v| v == values[i])
        })
        .collect()
}

struct Longitudinal {
    v: Vec<f64>,
    force: Vec<f64>,
    settled: Vec<bool>,
}

fn longitudinal(log: &RawLog, m: f64, opts: &PrepOptions) -> Result<Longitudinal, SysIdError> {
    let window = opts.smooth_window.min(odd_floor(log.len()));
    let v = smooth(&log.v_enc, window)?;
    let a = differentiate(&v, &log.t)?;
    let margin = samples(opts.settle_time, log.mean_dt()).max(window / 2 + 1);
    Ok(Longitudinal { force: a.iter().map(|a| m * a).collect(), settled: settled(&log.tau, margin), v })
}

fn odd_floor(n: usize) -> usize {
    if n.is_multiple_of(2) {
        n.saturating_sub(1).max(1)
    } else {
        n
    }
}

/// Coasting rows: `X = [v]`, `Y = [m dv/dt]` where the throttle is zero and
/// the car moves faster than `v_min`.
pub fn build_friction_dataset(logs: &[RawLog], m: f64, opts: &PrepOptions) -> Result<Dataset, SysIdError> {
    let mut data = Dataset::new(vec![ColumnInfo::new("v", "m/s")], vec![ColumnInfo::new("F_f", "N")]);
    for log in logs {
        let lon = longitudinal(log, m, opts)?;
        for i in 0..log.len() {
            if log.tau[i] == 0.0 && lon.settled[i] && lon.v[i] > opts.v_min {
                data.push_row(&[lon.v[i]], &[lon.force[i]])?;
            }
        }
    }
    if data.is_empty() {
        return Err(SysIdError::NoData("no coasting (tau = 0, v > v_min) samples"));
    }
    Ok(data)
}

/// Powered rows: `X = [tau, v]`, `Y = [m dv/dt - F_f(v)]` where the throttle is
/// positive and has been constant for the settle time.
pub fn build_motor_dataset(
    logs: &[RawLog],
    m: f64,
    friction: &FrictionParams,
    opts: &PrepOptions,
) -> Result<Dataset, SysIdError> {
    let mut data = Dataset::new(
        vec![ColumnInfo::new("tau", "-"), ColumnInfo::new("v", "m/s")],
        vec![ColumnInfo::new("F_m", "N")],
    );
    for log in logs {
        let lon = longitudinal(log, m, opts)?;
        for i in 0..log.len() {
            if log.tau[i] > 0.0 && lon.settled[i] {
                let label = lon.force[i] - friction_force(lon.v[i], friction);
                data.push_row(&[log.tau[i], lon.v[i]], &[label])?;
            }
        }
    }
    if data.is_empty() {
        return Err(SysIdError::NoData("no powered (tau > 0) samples"));
    }
    Ok(data)
}

/// Steering angle from yaw rate and speed by inverting the kinematic yaw
/// equation. Rows with `v <= v_min` are rejected as `None`.
pub fn estimate_steering_angle_series(
    omega: &[f64],
    v: &[f64],
    l: f64,
    v_min: f64,
) -> Result<Vec<Option<f64>>, SysIdError> {
    if omega.len() != v.len() {
        return Err(SysIdError::LengthMismatch { expected: omega.len(), got: v.len() });
    }
    Ok(omega
        .iter()
        .zip(v)
        .map(|(&w, &v)| (v > v_min).then(|| (l * w / v).atan()))
        .collect())
}

/// One row per constant-steering segment: `X = [s]`, `Y = [mean delta]`
/// averaged over the segment's steady rows.
pub fn build_steering_dataset(
    logs: &[RawLog],
    l: f64,
    opts: &PrepOptions,
) -> Result<(Dataset, Vec<BuildWarning>), SysIdError> {
    let mut data = Dataset::new(vec![ColumnInfo::new("s", "-")], vec![ColumnInfo::new("delta", "rad")]);
    let mut warnings = Vec::new();
    for (log_index, log) in logs.iter().enumerate() {
        let dt = log.mean_dt();
        let half = samples(opts.steady_window, dt) / 2;
        let window = opts.smooth_window.min(odd_floor(log.len()));
        let v = smooth(&log.v_enc, window)?;
        let delta = estimate_steering_angle_series(&log.omega_imu, &v, l, opts.v_min)?;

        let mut start = 0;
        while start < log.len() {
            let s = log.s[start];
            let mut end = start;
            while end + 1 < log.len() && log.s[end + 1] == s {
                end += 1;
            }
            let mut sum = 0.0;
            let mut count = 0usize;
            let mut slow = 0usize;
            if end - start >= 2 * half {
                for i in start + half..=end - half {
                    let win = &log.omega_imu[i - half..=i + half];
                    let mean = win.iter().sum::<f64>() / win.len() as f64;
                    let var = win.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / win.len() as f64;
                    if var.sqrt() >= opts.steady_rel_std * mean.abs() {
                        continue;
                    }
                    match delta[i] {
                        Some(d) => {
                            sum += d;
                            count += 1;
                        }
                        None => slow += 1,
                    }
                }
            }
            if count > half.max(1) {
                data.push_row(&[s], &[sum / count as f64])?;
            } else {
                let reason = if slow > 0 { "speed below v_min" } else { "no steady yaw rate" };
                warnings.push(BuildWarning {
                    log_index,
                    message: format!(
                        "segment s = {s} (t = {:.3}..{:.3} s) excluded: {reason}",
                        log.t[start], log.t[end]
                    ),
                });
            }
            start = end + 1;
        }
    }
    if data.is_empty() {
        return Err(SysIdError::NoData("no steady constant-steering segments"));
    }
    Ok((data, warnings))
}

/// Front and rear tire datasets derived from motion capture.
#[derive(Debug, Clone, PartialEq)]
pub struct TireDatasets {
    /// `X = [alpha_f]`, `Y = [lateral force in the front tire frame]`.
    pub front: Dataset,
    /// `X = [alpha_r]`, `Y = [rear lateral force]`.
    pub rear: Dataset,
    /// Rows dropped because the force system was near-singular.
    pub singular_rows: usize,
}

/// Vehicle-frame forces `(F_x, F_yf, F_yr)` from world-frame accelerations,
/// yaw acceleration and heading by solving the Newton-Euler equations.
/// Returns `None` when the system is near-singular.
pub fn solve_body_forces(
    accel: (f64, f64),
    yaw_accel: f64,
    eta: f64,
    params: &VehicleParams,
) -> Option<(f64, f64, f64)> {
    let g = &params.geometry;
    let (s, c) = eta.sin_cos();
    #[rustfmt::skip]
    let a = Matrix3::new(
        c, -s, -s,
        s, c, c,
        0.0, g.l_f, -g.l_r,
    );
    if a.determinant().abs() < 1e-9 * g.l.max(1e-12) {
        return None;
    }
    let rhs = Vector3::new(g.m * accel.0, g.m * accel.1, g.i_z * yaw_accel);
    let f = a.lu().solve(&rhs)?;
    Some((f[0], f[1], f[2]))
}

/// Builds the tire datasets from mocap logs. Requires the steering map (and
/// steering delay) in `params`.
pub fn build_tire_dataset(logs: &[RawLog], params: &VehicleParams, opts: &PrepOptions) -> Result<TireDatasets, SysIdError> {
    let mut front = Dataset::new(vec![ColumnInfo::new("alpha_f", "rad")], vec![ColumnInfo::new("F_yf", "N")]);
    let mut rear = Dataset::new(vec![ColumnInfo::new("alpha_r", "rad")], vec![ColumnInfo::new("F_yr", "N")]);
    let mut singular_rows = 0;
    for (index, log) in logs.iter().enumerate() {
        let mocap = log.mocap.as_ref().ok_or(SysIdError::MissingMocap { log_index: index })?;
        let n = log.len();
        let window = opts.mocap_smooth_window.min(odd_floor(n));
        let x = smooth(&mocap.x, window)?;
        let y = smooth(&mocap.y, window)?;
        let eta = smooth(&mocap.eta, window)?;
        let vx_w = differentiate(&x, &log.t)?;
        let vy_w = differentiate(&y, &log.t)?;
        let ax = differentiate(&vx_w, &log.t)?;
        let ay = differentiate(&vy_w, &log.t)?;
        let omega = differentiate(&eta, &log.t)?;
        let omega_dot = differentiate(&omega, &log.t)?;

        let dt = log.mean_dt();
        let lag = samples(params.delays.steer_delay, dt);
        let applied_s: Vec<f64> = (0..n).map(|i| log.s[i.saturating_sub(lag)]).collect();
        let settle = samples(opts.settle_time, dt).max(window / 2 + 1);
        let steady = settled(&applied_s, settle);
        let edge = window + 2;

        for i in 0..n {
            if i < edge || i + edge >= n || !steady[i] {
                continue;
            }
            let delta = steering_angle(applied_s[i], &params.steering);
            let (v_x, v_y) = body_frame_velocity((vx_w[i], vy_w[i]), eta[i]);
            let state = DynamicState { x: x[i], y: y[i], eta: eta[i], v_x, v_y, omega: omega[i] };
            if opts.slip_model == SlipModel::Normalized && v_x <= opts.v_min {
                continue;
            }
            let (alpha_f, alpha_r) = slip_angles(&state, delta, &params.geometry, opts.slip_model)?;
            let Some((f_x, f_yf, f_yr)) = solve_body_forces((ax[i], ay[i]), omega_dot[i], eta[i], params) else {
                singular_rows += 1;
                continue;
            };
            let front_label = (-delta).sin() * 0.5 * f_x + (-delta).cos() * f_yf;
            front.push_row(&[alpha_f], &[front_label])?;
            rear.push_row(&[alpha_r], &[f_yr])?;
        }
    }
    if front.is_empty() {
        return Err(SysIdError::NoData("no usable mocap rows for tire identification"));
    }
    Ok(TireDatasets { front, rear, singular_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::friction_force;
    use approx::assert_relative_eq;

    fn log_from(t: Vec<f64>, tau: Vec<f64>, s: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> RawLog {
        RawLog::new(t, tau, s, v, w, None).unwrap()
    }

    #[test]
    fn friction_requires_coasting() {
        let n = 50;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        let log = log_from(t, vec![0.3; n], vec![0.0; n], vec![1.0; n], vec![0.0; n]);
        let err = build_friction_dataset(&[log], 1.67, &PrepOptions::default()).unwrap_err();
        assert!(matches!(err, SysIdError::NoData(_)));
    }

    #[test]
    fn friction_rows_exclude_rest_and_transitions() {
        // Exact quadratic speed decay with rest at the end.
        let n = 200;
        let dt = 0.01;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let v: Vec<f64> = t.iter().map(|&t| if t < 1.0 { (1.0 - t).powi(2) } else { 0.0 }).collect();
        let tau: Vec<f64> = t.iter().map(|&t| if t < 0.2 { 0.3 } else { 0.0 }).collect();
        let log = log_from(t, tau, vec![0.0; n], v, vec![0.0; n]);
        let opts = PrepOptions { smooth_window: 1, ..Default::default() };
        let d = build_friction_dataset(&[log], 2.0, &opts).unwrap();
        for (x, y) in d.rows() {
            assert!(x[0] > 0.05);
            // dv/dt = -2 (1 - t) = -2 sqrt(v)
            assert_relative_eq!(y[0], 2.0 * -2.0 * x[0].sqrt(), epsilon = 1e-9);
        }
        // tau switches at sample 20; five samples of margin on either side.
        assert!(d.len() < 80 - 25 && d.len() > 40, "{}", d.len());
    }

    #[test]
    fn motor_labels_remove_friction() {
        let n = 100;
        let dt = 0.01;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let v: Vec<f64> = t.iter().map(|&t| 0.5 + 0.8 * t).collect();
        let mut tau = vec![0.3; n];
        tau[..10].iter_mut().for_each(|x| *x = 0.0);
        let fr = FrictionParams { a: 1.72, b: 13.32, c: 0.29 };
        let log = log_from(t, tau, vec![0.0; n], v, vec![0.0; n]);
        let d = build_motor_dataset(&[log], 1.5, &fr, &PrepOptions::default()).unwrap();
        assert!(d.rows().all(|(x, _)| x[0] == 0.3));
        for (x, y) in d.rows() {
            assert_relative_eq!(y[0], 1.5 * 0.8 - friction_force(x[1], &fr), epsilon = 1e-9);
        }
    }

    #[test]
    fn steering_angle_estimates() {
        let d = estimate_steering_angle_series(&[0.0, 1.0, 1.0], &[1.0, 1.0, 0.01], 0.2, 0.05).unwrap();
        assert_eq!(d[0], Some(0.0));
        assert_relative_eq!(d[1].unwrap(), 0.2f64.atan());
        assert_relative_eq!(d[1].unwrap(), 0.1974, epsilon = 1e-4);
        assert_eq!(d[2], None);

        let l = 0.192;
        for delta in [-0.45, -0.1, 0.02, 0.3, 0.49] {
            let v = 1.3;
            let w = v * f64::tan(delta) / l;
            let back = estimate_steering_angle_series(&[w], &[v], l, 0.05).unwrap()[0].unwrap();
            assert_relative_eq!(back, delta, epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_segments_are_averaged_and_slow_ones_flagged() {
        let l = 0.192;
        let dt = 0.01;
        let mut t = Vec::new();
        let mut s = Vec::new();
        let mut v = Vec::new();
        let mut w = Vec::new();
        let segments = [(-0.6, 1.0, 0.3), (0.4, 1.2, -0.2), (0.8, 0.02, 0.25)];
        for (k, &(seg_s, speed, delta)) in segments.iter().enumerate() {
            for i in 0..150 {
                t.push((k * 150 + i) as f64 * dt);
                s.push(seg_s);
                v.push(speed);
                w.push(speed * f64::tan(delta) / l);
            }
        }
        let n = t.len();
        let log = log_from(t, vec![0.2; n], s, v, w);
        let (d, warnings) = build_steering_dataset(&[log], l, &PrepOptions::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.x_column(0), vec![-0.6, 0.4]);
        assert_relative_eq!(d.y_row(0)[0], 0.3, epsilon = 1e-12);
        assert_relative_eq!(d.y_row(1)[0], -0.2, epsilon = 1e-12);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].message.contains("s = 0.8"));
    }

    #[test]
    fn force_solve_matches_closed_form_at_zero_heading() {
        let p = VehicleParams::reference();
        let g = p.geometry;
        for &(ax, ay, wd) in &[(0.3, -1.2, 4.0), (-2.0, 0.7, -11.0), (0.0, 0.0, 0.5)] {
            let (fx, fyf, fyr) = solve_body_forces((ax, ay), wd, 0.0, &p).unwrap();
            let closed_front = (g.i_z * wd + g.l_r * g.m * ay) / (g.l_f + g.l_r);
            let closed_rear = (g.l_f * g.m * ay - g.i_z * wd) / (g.l_f + g.l_r);
            assert_relative_eq!(fx, g.m * ax, max_relative = 1e-10, epsilon = 1e-14);
            assert_relative_eq!(fyf, closed_front, max_relative = 1e-10);
            assert_relative_eq!(fyr, closed_rear, max_relative = 1e-10);
        }
    }

    #[test]
    fn straight_constant_speed_gives_zero_forces() {
        let p = VehicleParams::reference();
        let n = 100;
        let dt = 0.01;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let eta0: f64 = 0.7;
        let x: Vec<f64> = t.iter().map(|t| t * eta0.cos()).collect();
        let y: Vec<f64> = t.iter().map(|t| t * eta0.sin()).collect();
        let mocap = crate::sysid::Mocap { x, y, eta: vec![eta0; n] };
        let s0 = -p.steering.c_t;
        let log = RawLog::new(t, vec![0.2; n], vec![s0; n], vec![1.0; n], vec![0.0; n], Some(mocap)).unwrap();
        let d = build_tire_dataset(&[log], &p, &PrepOptions::default()).unwrap();
        assert!(!d.front.is_empty());
        for (x, y) in d.front.rows().chain(d.rear.rows()) {
            assert!(x[0].abs() < 1e-9 && y[0].abs() < 1e-9, "{x:?} {y:?}");
        }
    }

    #[test]
    fn tire_dataset_requires_mocap() {
        let log = log_from(vec![0.0, 0.01, 0.02], vec![0.0; 3], vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]);
        let err = build_tire_dataset(&[log], &VehicleParams::reference(), &PrepOptions::default()).unwrap_err();
        assert!(matches!(err, SysIdError::MissingMocap { log_index: 0 }));
    }
}
