use carid::models::{kinematic_rhs, Geometry, KinematicState, SlipModel, TireParams, VehicleParams};
use carid::sim::{
    integrate_rk4, sample_log, simulate, steady_throttle, synthesize_log, ModelKind, NoiseSpec, Scenario, Schedule,
    SimError, StateSeries,
};
use carid::sysid::estimate_delay_xcorr;
use proptest::prelude::*;

fn constant(value: f64) -> Schedule {
    Schedule::Constant { value }
}

fn kinematic_speeds(traj: &carid::sim::Trajectory) -> Vec<f64> {
    match &traj.states {
        StateSeries::Kinematic(s) => s.iter().map(|s| s.v).collect(),
        StateSeries::Dynamic(_) => panic!("expected kinematic states"),
    }
}

/// Root of the longitudinal balance written out from the curve definitions,
/// found by plain bisection.
fn balance_speed(tau: f64) -> f64 {
    let (a, b, c, d, e, g) = (1.72, 13.32, 0.29, 28.88, 5.99, -0.15);
    let force = |v: f64| {
        let x = tau + g;
        let throttle = x * 0.5 * ((100.0 * x).tanh() + 1.0);
        (d - v * e) * throttle - (a * (b * v).tanh() + v * c)
    };
    let (mut lo, mut hi) = (0.0, d / e);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if force(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn zero_input_stays_put() {
    let sc = Scenario::new("idle", 3.0, 0.01, constant(0.0), constant(0.0), ModelKind::Kinematic);
    let traj = simulate(&sc, &VehicleParams::reference()).unwrap();
    assert_eq!(traj.len(), 301);
    // The smoothed throttle dead zone leaks ~1e-14 N at tau = 0.
    for k in 0..traj.len() {
        let (x, y, eta) = traj.com_pose(k);
        assert!(x.abs() < 1e-12 && y.abs() < 1e-12 && eta.abs() < 1e-12);
        assert!(traj.encoder_speed(k).abs() < 1e-12);
    }
}

#[test]
fn step_throttle_settles_at_force_balance() {
    let p = VehicleParams::reference();
    let sc = Scenario::new("step", 10.0, 0.01, constant(0.2), constant(0.0), ModelKind::Kinematic);
    let v = kinematic_speeds(&simulate(&sc, &p).unwrap());
    assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-12), "speed must rise monotonically");
    let target = balance_speed(0.2);
    let last = *v.last().unwrap();
    assert!((last - target).abs() <= 0.01 * target, "terminal {last} vs balance {target}");

    let sc = Scenario::new("step", 10.0, 0.01, constant(0.4), constant(0.0), ModelKind::Kinematic);
    let last = *kinematic_speeds(&simulate(&sc, &p).unwrap()).last().unwrap();
    assert!((last - balance_speed(0.4)).abs() <= 0.01 * balance_speed(0.4));
}

#[test]
fn applied_steering_lags_command_by_configured_delay() {
    let p = VehicleParams::reference();
    let sc = Scenario::new(
        "sine",
        12.0,
        0.01,
        constant(0.25),
        Schedule::Sine { offset: 0.0, amplitude: 0.8, frequency: 0.5, phase: 0.0 },
        ModelKind::Kinematic,
    );
    let traj = simulate(&sc, &p).unwrap();
    let cmd: Vec<f64> = traj.commanded.iter().map(|c| c.s).collect();
    let applied: Vec<f64> = traj.applied.iter().map(|c| c.s).collect();
    let d = estimate_delay_xcorr(&cmd, &applied, 0.01, 0.5).unwrap();
    assert!((d - 0.15).abs() <= 0.01 + 1e-12, "{d}");
}

#[test]
fn kinematic_circle_closes() {
    let g = VehicleParams::reference().geometry;
    let (delta, v) = (0.3f64, 0.8);
    let radius = g.l / delta.tan();
    let period = 2.0 * std::f64::consts::PI * radius / v;
    let steps = 4000;
    let dt = period / steps as f64;
    let start = KinematicState { x: 0.3, y: -0.2, eta: 0.7, v };
    let end = integrate_rk4(
        |y: &[f64; 4]| Ok(kinematic_rhs(&KinematicState::from_array(*y), delta, 0.0, &g)?),
        start.to_array(),
        dt,
        steps,
    )
    .unwrap();
    let err = ((end[0] - start.x).powi(2) + (end[1] - start.y).powi(2)).sqrt();
    assert!(err < 1e-6 * radius, "closure error {err}, radius {radius}");
}

#[test]
fn noiseless_log_matches_trajectory() {
    let p = VehicleParams::reference();
    let mut sc = Scenario::new(
        "ramp",
        4.0,
        0.01,
        Schedule::Ramp { from: 0.2, to: 0.3, t0: 0.0, t1: 3.0 },
        constant(0.4),
        ModelKind::Dynamic,
    );
    sc.mocap = true;
    let traj = simulate(&sc, &p).unwrap();
    let log = sample_log(&traj, &NoiseSpec::noiseless(3), true).unwrap();
    let mocap = log.mocap.as_ref().unwrap();
    for k in 0..traj.len() {
        assert_eq!(log.v_enc[k], traj.encoder_speed(k));
        assert_eq!(log.omega_imu[k], traj.yaw_rate(k));
        assert_eq!((mocap.x[k], mocap.y[k], mocap.eta[k]), traj.com_pose(k));
        assert_eq!((log.tau[k], log.s[k]), (traj.commanded[k].tau, traj.commanded[k].s));
    }
}

#[test]
fn same_seed_gives_identical_output() {
    let p = VehicleParams::reference();
    let mut sc = Scenario::new(
        "steer",
        3.0,
        0.01,
        constant(0.3),
        Schedule::Sine { offset: 0.0, amplitude: 0.5, frequency: 0.5, phase: 0.3 },
        ModelKind::Kinematic,
    );
    sc.mocap = true;
    let noise = NoiseSpec { v_enc: 0.02, omega_imu: 0.01, mocap_x: 1e-3, mocap_y: 1e-3, mocap_eta: 1e-3, seed: 11 };
    let a = synthesize_log(&sc, &p, &noise).unwrap();
    let b = synthesize_log(&sc, &p, &noise).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.v_enc), bits(&b.v_enc));
    assert_eq!(bits(&a.mocap.as_ref().unwrap().eta), bits(&b.mocap.as_ref().unwrap().eta));
    assert_eq!(simulate(&sc, &p).unwrap(), simulate(&sc, &p).unwrap());
    let c = synthesize_log(&sc, &p, &NoiseSpec { seed: 12, ..noise }).unwrap();
    assert_ne!(bits(&a.v_enc), bits(&c.v_enc));
}

#[test]
fn divergence_returns_partial_trajectory() {
    let mut p = VehicleParams::reference();
    p.geometry.i_z = 1e-12;
    let sc = Scenario::new("spin", 5.0, 0.05, constant(0.6), constant(0.8), ModelKind::Dynamic);
    match simulate(&sc, &p) {
        Err(SimError::Aborted { partial, cause }) => {
            assert!(partial.len() < sc.samples());
            assert!(!partial.is_empty());
            assert!(matches!(*cause, SimError::Diverged { .. } | SimError::NonFinite { .. }));
        }
        other => panic!("expected an aborted run, got {other:?}"),
    }
}

/// With tires far stiffer than the reference set, lateral slip vanishes and
/// the dynamic model must track the kinematic one at low speed. Only the
/// normalized slip form has zero slip under rolling without sideslip.
#[test]
fn stiff_tires_track_kinematic_model() {
    let mut p = VehicleParams::reference();
    p.tire = TireParams { d: 50.0, c: 1.5, b: 3.0, e: 0.0, c_r: 225.0 };
    p.geometry = Geometry { l_f: 0.08, l_r: 0.112, ..p.geometry };
    p.delays.steer_delay = 0.0;
    let v = 0.5;
    let tau = steady_throttle(v, &p).unwrap();
    for s in [-0.3, -0.1, 0.05, 0.3] {
        let mut sc = Scenario::new("c", 5.0, 0.002, constant(tau), constant(s), ModelKind::Kinematic);
        sc.initial.v_x = v;
        sc.slip_model = SlipModel::Normalized;
        let kin = simulate(&sc, &p).unwrap();
        sc.model = ModelKind::Dynamic;
        let dynm = simulate(&sc, &p).unwrap();
        let n = kin.len() - 1;
        let path: f64 = (0..n).map(|k| kin.encoder_speed(k) * sc.dt).sum();
        let (a, b) = (kin.com_pose(n), dynm.com_pose(n));
        let gap = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        assert!(gap < 0.05 * path, "s = {s}: gap {gap} over path {path}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coasting_never_gains_speed(v0 in 0.0f64..4.0, s in -1.0f64..1.0) {
        let mut sc = Scenario::new("coast", 3.0, 0.01, constant(0.0), constant(s), ModelKind::Kinematic);
        sc.initial.v_x = v0;
        let v = kinematic_speeds(&simulate(&sc, &VehicleParams::reference()).unwrap());
        prop_assert!(v.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn applied_steering_is_delayed_copy(delay in 0.0f64..0.4, dt in 0.005f64..0.02) {
        let mut p = VehicleParams::reference();
        p.delays.steer_delay = delay;
        let sc = Scenario::new(
            "sine", 6.0, dt, constant(0.25),
            Schedule::Sine { offset: 0.0, amplitude: 0.6, frequency: 0.7, phase: 0.0 },
            ModelKind::Kinematic,
        );
        let traj = simulate(&sc, &p).unwrap();
        let cmd: Vec<f64> = traj.commanded.iter().map(|c| c.s).collect();
        let applied: Vec<f64> = traj.applied.iter().map(|c| c.s).collect();
        let est = estimate_delay_xcorr(&cmd, &applied, dt, 0.5).unwrap();
        prop_assert!((est - delay).abs() <= dt + 1e-9, "{} vs {}", est, delay);
    }
}
