//! Named scenario batteries matching the identification experiments.

use serde::{Deserialize, Serialize};

use crate::models::VehicleParams;
use crate::sysid::Experiment;

use super::scenario::{ModelKind, Scenario, Schedule};

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryScenario {
    pub experiment: Experiment,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LibraryOptions {
    pub dt: f64,
    /// Throttle levels of the step battery.
    pub step_levels: Vec<f64>,
    /// Launch throttle of each coast-down run.
    pub coast_launch: Vec<f64>,
    /// Launch/coast cycles per coast-down run. Each ends in a stop, and the
    /// friction curvature near zero speed is only observed during stops.
    pub coast_cycles: usize,
    pub coast_launch_time: f64,
    pub coast_time: f64,
    /// Spacing of the constant-steering grid over `[-1, 1]`.
    pub steer_grid_step: f64,
    pub steer_throttle: f64,
    pub sine_frequency: f64,
    pub sine_amplitude: f64,
    pub sine_throttle: f64,
    pub sine_duration: f64,
    /// Steering inputs of the circular ramps.
    pub ramp_steering: Vec<f64>,
    pub ramp_start_speed: f64,
    pub ramp_top_speed: f64,
    pub ramp_duration: f64,
}

impl Default for LibraryOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            step_levels: vec![0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
            coast_launch: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            coast_cycles: 20,
            coast_launch_time: 1.0,
            coast_time: 3.0,
            steer_grid_step: 0.2,
            steer_throttle: 0.25,
            sine_frequency: 0.5,
            sine_amplitude: 0.8,
            sine_throttle: 0.25,
            sine_duration: 12.0,
            ramp_steering: vec![-0.8, -0.4, 0.4, 0.8],
            ramp_start_speed: 0.05,
            ramp_top_speed: 0.25,
            ramp_duration: 20.0,
        }
    }
}

fn constant(value: f64) -> Schedule {
    Schedule::Constant { value }
}

/// Throttle-step responses from rest at zero steering: 0.5 s idle, 6 s at
/// the level, then 3.5 s coasting.
pub fn step_battery(opts: &LibraryOptions) -> Vec<LibraryScenario> {
    opts.step_levels
        .iter()
        .map(|&tau| LibraryScenario {
            experiment: Experiment::Step,
            scenario: Scenario::new(
                &format!("step_tau{tau:.2}"),
                10.0,
                opts.dt,
                Schedule::Piecewise { times: vec![0.0, 0.5, 6.5], values: vec![0.0, tau, 0.0] },
                constant(0.0),
                ModelKind::Kinematic,
            ),
        })
        .collect()
}

/// Repeated launches at the given throttle, each followed by zero throttle
/// long enough to roll to a stop.
pub fn coast_down_battery(opts: &LibraryOptions) -> Vec<LibraryScenario> {
    let period = opts.coast_launch_time + opts.coast_time;
    opts.coast_launch
        .iter()
        .map(|&tau| {
            let mut times = Vec::new();
            let mut values = Vec::new();
            for k in 0..opts.coast_cycles.max(1) {
                let start = k as f64 * period;
                times.extend([start, start + opts.coast_launch_time]);
                values.extend([tau, 0.0]);
            }
            LibraryScenario {
                experiment: Experiment::Coast,
                scenario: Scenario::new(
                    &format!("coast_tau{tau:.2}"),
                    period * opts.coast_cycles.max(1) as f64,
                    opts.dt,
                    Schedule::Piecewise { times, values },
                    constant(0.0),
                    ModelKind::Kinematic,
                ),
            }
        })
        .collect()
}

/// Constant steering inputs on a grid over `[-1, 1]` at constant throttle.
pub fn steering_battery(opts: &LibraryOptions) -> Vec<LibraryScenario> {
    let count = (2.0 / opts.steer_grid_step).round() as usize + 1;
    (0..count)
        .map(|i| {
            let s = (-1.0 + i as f64 * opts.steer_grid_step).clamp(-1.0, 1.0);
            // Avoid "-0.00" in names.
            let s = if s.abs() < 1e-12 { 0.0 } else { s };
            LibraryScenario {
                experiment: Experiment::Steer,
                scenario: Scenario::new(
                    &format!("steer_s{s:+.2}"),
                    8.0,
                    opts.dt,
                    constant(opts.steer_throttle),
                    constant(s),
                    ModelKind::Kinematic,
                ),
            }
        })
        .collect()
}

/// Sinusoidal steering at constant throttle.
pub fn sine_steering(opts: &LibraryOptions) -> LibraryScenario {
    LibraryScenario {
        experiment: Experiment::Sine,
        scenario: Scenario::new(
            &format!("sine_{:.2}hz", opts.sine_frequency),
            opts.sine_duration,
            opts.dt,
            constant(opts.sine_throttle),
            Schedule::Sine { offset: 0.0, amplitude: opts.sine_amplitude, frequency: opts.sine_frequency, phase: 0.0 },
            ModelKind::Kinematic,
        ),
    }
}

/// Throttle holding speed `v` against friction in straight-line motion, or
/// `None` when `v` is out of reach for `tau <= 1`.
pub fn steady_throttle(v: f64, params: &VehicleParams) -> Option<f64> {
    let f = |tau: f64| params.longitudinal_force(tau, v);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    if f(hi) < 0.0 || f(lo) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Dynamic-model run at constant steering whose throttle ramps between the
/// straight-line steady throttles of the start and top speeds, with the
/// last fifth of the run held at the top level. Recorded with mocap.
pub fn circular_ramp(s: f64, opts: &LibraryOptions, params: &VehicleParams) -> Option<LibraryScenario> {
    let from = steady_throttle(opts.ramp_start_speed, params)?;
    let to = steady_throttle(opts.ramp_top_speed, params)?;
    let mut scenario = Scenario::new(
        &format!("mocap_s{s:+.2}"),
        opts.ramp_duration,
        opts.dt,
        Schedule::Ramp { from, to, t0: 0.0, t1: 0.8 * opts.ramp_duration },
        constant(s),
        ModelKind::Dynamic,
    );
    scenario.initial.v_x = opts.ramp_start_speed;
    scenario.mocap = true;
    Some(LibraryScenario { experiment: Experiment::Mocap, scenario })
}

/// Every battery: steps, coast-downs, constant steering, sine steering and
/// circular ramps.
pub fn scenario_library(opts: &LibraryOptions, params: &VehicleParams) -> Vec<LibraryScenario> {
    let mut out = step_battery(opts);
    out.extend(coast_down_battery(opts));
    out.extend(steering_battery(opts));
    out.push(sine_steering(opts));
    out.extend(opts.ramp_steering.iter().filter_map(|&s| circular_ramp(s, opts, params)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_sizes() {
        let o = LibraryOptions::default();
        assert_eq!(step_battery(&o).len(), 6);
        let steer = steering_battery(&o);
        assert_eq!(steer.len(), 11);
        assert_eq!(steer[0].scenario.steering.value(0.0), -1.0);
        assert_eq!(steer[10].scenario.steering.value(0.0), 1.0);
        assert_eq!(steer[5].scenario.name, "steer_s+0.00");
        for sc in scenario_library(&o, &VehicleParams::reference()) {
            sc.scenario.validate().unwrap();
        }
    }

    #[test]
    fn ramp_schedule_ends_at_top_speed_throttle() {
        let p = VehicleParams::reference();
        let o = LibraryOptions::default();
        let sc = circular_ramp(0.4, &o, &p).unwrap().scenario;
        let tau_end = sc.throttle.value(sc.duration);
        assert!(p.longitudinal_force(tau_end, o.ramp_top_speed).abs() < 1e-9);
        assert!(sc.throttle.value(0.0) < tau_end);
        assert!(sc.mocap && sc.model == ModelKind::Dynamic);
    }

    #[test]
    fn unreachable_speed_has_no_throttle() {
        assert!(steady_throttle(50.0, &VehicleParams::reference()).is_none());
    }
}
