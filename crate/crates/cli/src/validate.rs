use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use carid::models::{
    body_frame_velocity, dynamic_rhs, kinematic_rhs, steering_angle, DynamicState, KinematicState, SlipModel,
    VehicleParams,
};
use carid::sim::{rk4_step, ModelKind};
use carid::sysid::{differentiate_uniform5, load_log, RawLog};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::io::{read_complete_params, to_json_pretty, write_file, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Kinematic,
    Dynamic,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Kinematic => ModelKind::Kinematic,
            ModelArg::Dynamic => ModelKind::Dynamic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SlipArg {
    Unnormalized,
    Normalized,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub params: PathBuf,
    /// Held-out log CSV.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "unnormalized")]
    pub slip: SlipArg,
    /// Report JSON path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub model: ModelKind,
    pub slip_model: SlipModel,
    /// Number of one-step predictions scored.
    pub steps: usize,
    /// Root-mean-square one-step prediction error per channel. `lateral` is
    /// the position error across the measured heading.
    pub rms: BTreeMap<&'static str, f64>,
}

/// Applied input sequence: commanded values shifted by the delay in whole
/// samples, holding the first command during warm-up.
fn delayed(values: &[f64], delay: f64, dt: f64) -> Vec<f64> {
    let k = (delay / dt).round() as usize;
    (0..values.len()).map(|i| values[i.saturating_sub(k)]).collect()
}

fn uniform_dt(t: &[f64]) -> Result<f64> {
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if let Some(i) = t.windows(2).position(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1e-9)) {
        bail!("log is not uniformly sampled near row {} (needed for pose differentiation)", i + 2);
    }
    Ok(dt)
}

pub fn one_step_rms(log: &RawLog, params: &VehicleParams, model: ModelKind, slip: SlipModel) -> Result<ValidationReport> {
    let n = log.len();
    if n < 6 {
        bail!("log has {n} samples; at least 6 are needed");
    }
    let g = params.geometry;
    let dt = uniform_dt(&log.t)?;
    let s_applied = delayed(&log.s, params.delays.steer_delay, dt);
    let tau_applied = delayed(&log.tau, params.delays.long_delay, dt);
    let mocap = log.mocap.as_ref();

    let mut sq: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut add = |name: &'static str, e: f64| *sq.entry(name).or_insert(0.0) += e * e;
    let lateral = |dx: f64, dy: f64, eta: f64| -dx * eta.sin() + dy * eta.cos();
    let mut steps = 0usize;

    match model {
        ModelKind::Kinematic => {
            let state = |k: usize| match mocap {
                Some(m) => KinematicState {
                    x: m.x[k] - g.l_r * m.eta[k].cos(),
                    y: m.y[k] - g.l_r * m.eta[k].sin(),
                    eta: m.eta[k],
                    v: log.v_enc[k],
                },
                None => KinematicState { x: 0.0, y: 0.0, eta: 0.0, v: log.v_enc[k] },
            };
            for k in 0..n - 1 {
                let delta = steering_angle(s_applied[k], &params.steering);
                let tau = tau_applied[k];
                let next = rk4_step(
                    |y: &[f64; 4]| {
                        let s = KinematicState::from_array(*y);
                        Ok(kinematic_rhs(&s, delta, params.longitudinal_force(tau, s.v), &g)?)
                    },
                    &state(k).to_array(),
                    log.t[k],
                    log.t[k + 1] - log.t[k],
                )?;
                let (pred, meas) = (KinematicState::from_array(next), state(k + 1));
                add("v", pred.v - meas.v);
                if mocap.is_some() {
                    add("x", pred.x - meas.x);
                    add("y", pred.y - meas.y);
                    add("eta", pred.eta - meas.eta);
                    add("lateral", lateral(pred.x - meas.x, pred.y - meas.y, meas.eta));
                }
                steps += 1;
            }
        }
        ModelKind::Dynamic => {
            let m = mocap.context("the dynamic model needs motion-capture pose columns (x_t, y_t, eta_t) for x, y, eta and v_y")?;
            let xd = differentiate_uniform5(&m.x, dt)?;
            let yd = differentiate_uniform5(&m.y, dt)?;
            let state = |k: usize| DynamicState {
                x: m.x[k],
                y: m.y[k],
                eta: m.eta[k],
                v_x: log.v_enc[k],
                v_y: body_frame_velocity((xd[k], yd[k]), m.eta[k]).1,
                omega: log.omega_imu[k],
            };
            // The two samples at each end only have low-order derivatives.
            for k in 2..n - 3 {
                let delta = steering_angle(s_applied[k], &params.steering);
                let tau = tau_applied[k];
                let next = rk4_step(
                    |y: &[f64; 6]| {
                        let s = DynamicState::from_array(*y);
                        Ok(dynamic_rhs(&s, delta, params.longitudinal_force(tau, s.v_x), params, slip)?)
                    },
                    &state(k).to_array(),
                    log.t[k],
                    log.t[k + 1] - log.t[k],
                )?;
                let (pred, meas) = (DynamicState::from_array(next), state(k + 1));
                add("x", pred.x - meas.x);
                add("y", pred.y - meas.y);
                add("eta", pred.eta - meas.eta);
                add("v_x", pred.v_x - meas.v_x);
                add("v_y", pred.v_y - meas.v_y);
                add("omega", pred.omega - meas.omega);
                add("lateral", lateral(pred.x - meas.x, pred.y - meas.y, meas.eta));
                steps += 1;
            }
        }
    }
    let rms = sq.into_iter().map(|(k, v)| (k, (v / steps as f64).sqrt())).collect();
    Ok(ValidationReport { model, slip_model: slip, steps, rms })
}

pub fn run(args: &ValidateArgs) -> Result<()> {
    let (_, params) = read_complete_params(&args.params)?;
    let file = fs::File::open(&args.log).with_context(|| format!("cannot open {}", args.log.display()))?;
    let log = load_log(file).with_context(|| format!("in {}", args.log.display()))?;
    let slip = match args.slip {
        SlipArg::Unnormalized => SlipModel::Unnormalized,
        SlipArg::Normalized => SlipModel::Normalized,
    };
    let report = one_step_rms(&log, &params, args.model.into(), slip)?;
    let text = to_json_pretty(&report)?;
    match &args.out {
        Some(out) => {
            write_file(out, &text)?;
            let mut run = RunManifest::new(
                "validate",
                json!({ "params": args.params, "log": args.log, "model": report.model, "slip": slip, "out": out }),
            );
            run.input(&args.params)?;
            run.input(&args.log)?;
            run.output(out)?;
            run.decisions = json!({ "v_y": "five-point derivative of mocap pose, rotated into the body frame" });
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).map(PathBuf::from).unwrap_or_else(|| ".".into());
            run.write(&dir)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use carid::sim::{sample_log, simulate, NoiseSpec, Scenario, Schedule};

    fn noiseless(model: ModelKind, s: f64, v0: f64) -> RawLog {
        let mut sc = Scenario::new(
            "v",
            4.0,
            0.01,
            Schedule::Constant { value: 0.3 },
            Schedule::Step { before: 0.0, after: s, at: 1.0 },
            model,
        );
        sc.initial.v_x = v0;
        sc.mocap = true;
        let traj = simulate(&sc, &VehicleParams::reference()).unwrap();
        sample_log(&traj, &NoiseSpec::noiseless(0), true).unwrap()
    }

    #[test]
    fn generating_model_predicts_its_own_log() {
        let p = VehicleParams::reference();
        let r = one_step_rms(&noiseless(ModelKind::Kinematic, 0.4, 0.0), &p, ModelKind::Kinematic, SlipModel::Unnormalized).unwrap();
        assert_eq!(r.rms.len(), 5);
        for (ch, v) in &r.rms {
            assert!(*v < 1e-6, "{ch}: {v}");
        }
    }

    #[test]
    fn delayed_holds_first_command() {
        assert_eq!(delayed(&[1.0, 2.0, 3.0, 4.0], 0.02, 0.01), vec![1.0, 1.0, 1.0, 2.0]);
        assert_eq!(delayed(&[1.0, 2.0], 0.0, 0.01), vec![1.0, 2.0]);
    }

    #[test]
    fn dynamic_model_requires_mocap() {
        let mut log = noiseless(ModelKind::Dynamic, 0.2, 0.2);
        log.mocap = None;
        let err = one_step_rms(&log, &VehicleParams::reference(), ModelKind::Dynamic, SlipModel::Unnormalized).unwrap_err();
        assert!(err.to_string().contains("motion-capture"));
    }
}
