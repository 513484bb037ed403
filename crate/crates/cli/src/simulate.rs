use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use carid::sim::{simulate, Scenario, SimError, Trajectory};
use clap::Args;
use serde_json::json;

use crate::io::{read_complete_params, write_file, RunManifest};
use crate::svg::{Plot, Series};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub params: PathBuf,
    /// Scenario JSON (schedules typed as `step`, `piecewise`, `sine`, `ramp` or `constant`).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let (_, params) = read_complete_params(&args.params)?;
    let text = fs::read_to_string(&args.scenario).with_context(|| format!("cannot read {}", args.scenario.display()))?;
    let scenario = Scenario::from_json(&text).with_context(|| format!("in {}", args.scenario.display()))?;

    let mut run = RunManifest::new("simulate", json!({ "params": args.params, "scenario": args.scenario, "out": args.out }));
    run.input(&args.params)?;
    run.input(&args.scenario)?;
    run.decisions = json!({ "model": scenario.model, "slip_model": scenario.slip_model, "delays": params.delays });

    let (traj, failure) = match simulate(&scenario, &params) {
        Ok(t) => (t, None),
        Err(SimError::Aborted { partial, cause }) => (*partial, Some(cause)),
        Err(e) => return Err(e.into()),
    };
    for path in write_outputs(&traj, &args.out)? {
        run.output(&path)?;
    }
    run.write(&args.out)?;
    if let Some(cause) = failure {
        anyhow::bail!("simulation aborted at t = {:.3} s ({cause}); partial trajectory written", traj.t.last().copied().unwrap_or(0.0));
    }
    eprintln!("simulated {} samples into {}", traj.len(), args.out.display());
    Ok(())
}

fn write_outputs(traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    let path = dir.join("trajectory.csv");
    write_file(&path, csv)?;
    written.push(path);

    let n = traj.len();
    let pose: Vec<(f64, f64, f64)> = (0..n).map(|k| traj.com_pose(k)).collect();
    let mut path_plot = Plot::new("Path (centre of mass)", "x [m]", "y [m]")
        .with(Series::line("path", pose.iter().map(|p| (p.0, p.1)).collect()));
    path_plot.equal_aspect = true;

    let series = |f: &dyn Fn(usize) -> f64| (0..n).map(|k| (traj.t[k], f(k))).collect::<Vec<_>>();
    let plots = [
        ("path.svg", path_plot),
        (
            "speed.svg",
            Plot::new("Longitudinal speed", "t [s]", "v [m/s]").with(Series::line("v", series(&|k| traj.encoder_speed(k)))),
        ),
        (
            "yaw_rate.svg",
            Plot::new("Yaw rate", "t [s]", "omega [rad/s]").with(Series::line("omega", series(&|k| traj.yaw_rate(k)))),
        ),
        (
            "heading.svg",
            Plot::new("Heading", "t [s]", "eta [rad]").with(Series::line("eta", series(&|k| pose[k].2))),
        ),
        (
            "inputs.svg",
            Plot::new("Inputs", "t [s]", "command [-]")
                .with(Series::line("tau commanded", series(&|k| traj.commanded[k].tau)))
                .with(Series::line("tau applied", series(&|k| traj.applied[k].tau)))
                .with(Series::line("s commanded", series(&|k| traj.commanded[k].s)))
                .with(Series::line("s applied", series(&|k| traj.applied[k].s))),
        ),
    ];
    for (name, plot) in plots {
        let path = dir.join(name);
        write_file(&path, plot.render())?;
        written.push(path);
    }
    Ok(written)
}
