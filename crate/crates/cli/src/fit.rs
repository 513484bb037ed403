use std::path::{Path, PathBuf};

use anyhow::Result;
use carid::models::{
    friction_force, motor_force, pacejka_lateral, rear_lateral, steering_angle, Geometry, VehicleParams,
};
use carid::sysid::{fit_pipeline, Dataset, ParamsDocument, PipelineConfig, PipelineOutcome, Stage, StageStatus};
use clap::Args;
use serde_json::json;

use crate::io::{read_json, to_json_pretty, write_file, RunManifest};
use crate::logs;
use crate::svg::{sample_curve, Plot, Series};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Directory of tagged logs (manifest.json or per-experiment sub-directories).
    #[arg(long)]
    pub logs: PathBuf,
    /// Output parameter JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Stages to run; when given, any of them not completing is an error.
    #[arg(long, value_delimiter = ',')]
    pub stages: Option<Vec<Stage>>,
    /// Vehicle geometry JSON (m, l, l_f, l_r, w, I_z); reference geometry otherwise.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    /// Full pipeline configuration JSON; --geometry and --stages override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Where loss traces, plots and the report go; `<out stem>_report` next to --out by default.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
}

/// Outcome of a fit run for the exit status.
#[derive(Debug, PartialEq, Eq)]
pub enum FitStatus {
    Complete,
    Incomplete,
}

fn default_report_dir(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "params".into());
    out.with_file_name(format!("{stem}_report"))
}

pub fn run(args: &FitArgs) -> Result<FitStatus> {
    let files = logs::discover(&args.logs)?;
    let tagged = logs::load_all(&files)?;

    let mut config = match &args.config {
        Some(p) => read_json::<PipelineConfig>(p)?,
        None => PipelineConfig::new(VehicleParams::reference().geometry),
    };
    if let Some(p) = &args.geometry {
        config.geometry = read_json::<Geometry>(p)?;
    }
    let explicit = args.stages.is_some();
    if let Some(stages) = &args.stages {
        config.stages = stages.clone();
    }

    let outcome = fit_pipeline(&tagged, &config)?;
    let report_dir = args.report_dir.clone().unwrap_or_else(|| default_report_dir(&args.out));

    let mut run = RunManifest::new(
        "fit",
        json!({
            "logs": args.logs, "out": args.out, "stages": args.stages, "geometry": args.geometry,
            "config": args.config, "report_dir": report_dir,
        }),
    );
    for (path, _) in &files {
        run.input(path)?;
    }
    for p in [&args.geometry, &args.config].into_iter().flatten() {
        run.input(p)?;
    }

    write_file(&args.out, to_json_pretty(&outcome.params)?)?;
    run.output(&args.out)?;
    for path in write_artifacts(&outcome, &report_dir)? {
        run.output(&path)?;
    }
    run.decisions = json!({
        "pipeline": config,
        "exit_policy": "stages without data are warnings unless --stages names them",
    });
    run.write(&report_dir)?;

    let mut status = FitStatus::Complete;
    for r in &outcome.stages {
        match &r.status {
            StageStatus::Completed => {
                let loss = r.fits.iter().map(|f| format!("{} loss {:.6e}", f.curve, f.result.final_loss)).collect::<Vec<_>>();
                let extra = r.estimate.map(|d| format!("estimate {d:.3} s")).into_iter();
                eprintln!("{}: completed ({})", r.stage, loss.into_iter().chain(extra).collect::<Vec<_>>().join(", "));
            }
            StageStatus::Skipped { reason } if !explicit => {
                eprintln!("warning: {} skipped: {reason}; its parameter group is absent", r.stage);
            }
            StageStatus::Skipped { reason } | StageStatus::Failed { reason } => {
                eprintln!("error: {} did not complete: {reason}", r.stage);
                status = FitStatus::Incomplete;
            }
        }
        for w in &r.warnings {
            eprintln!("warning: {}: {w}", r.stage);
        }
    }
    Ok(status)
}

/// Writes the stage report, one loss-trace CSV and one plot per fitted curve.
fn write_artifacts(outcome: &PipelineOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut stages = outcome.stages.clone();
    for r in &mut stages {
        for f in &mut r.fits {
            let mut csv = String::from("iteration,loss\n");
            for (i, l) in f.result.loss_trace.iter().enumerate() {
                csv.push_str(&format!("{i},{l}\n"));
            }
            let path = dir.join(format!("loss_{}.csv", f.curve));
            write_file(&path, csv)?;
            written.push(path);
            f.result.loss_trace.clear();
        }
    }
    let path = dir.join("fit_report.json");
    write_file(&path, to_json_pretty(&json!({ "stages": stages }))?)?;
    written.push(path);

    for (name, data) in &outcome.datasets {
        if let Some(plot) = curve_plot(name, data, &outcome.params) {
            let path = dir.join(format!("fit_{name}.svg"));
            write_file(&path, plot.render())?;
            written.push(path);
        }
    }
    Ok(written)
}

fn range(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn scatter(data: &Dataset, x_col: usize) -> Vec<(f64, f64)> {
    data.rows().map(|(x, y)| (x[x_col], y[0])).collect()
}

fn curve_plot(name: &str, data: &Dataset, params: &ParamsDocument) -> Option<Plot> {
    let plot = match name {
        "friction" => {
            let f = params.friction?;
            let (_, hi) = range(&data.x_column(0));
            Plot::new("Friction force", "v [m/s]", "F_f [N]")
                .with(Series::points("data", scatter(data, 0)))
                .with(Series::line("fit", sample_curve(0.0, hi, 200, |v| friction_force(v, &f))))
        }
        "motor" => {
            let m = params.motor?;
            let (_, hi) = range(&data.x_column(1));
            let mut levels: Vec<f64> = data.x_column(0).iter().map(|t| (t * 1000.0).round() / 1000.0).collect();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            let stride = levels.len().div_ceil(6).max(1);
            let mut plot = Plot::new("Motor force", "v [m/s]", "F_m [N]").with(Series::points("data", scatter(data, 1)));
            for &tau in levels.iter().step_by(stride) {
                plot = plot.with(Series::line(format!("fit tau={tau}"), sample_curve(0.0, hi, 100, |v| motor_force(tau, v, &m))));
            }
            plot
        }
        "steering" => {
            let s = params.steering?;
            Plot::new("Steering map", "s [-]", "delta [rad]")
                .with(Series::points("data", scatter(data, 0)))
                .with(Series::line("fit", sample_curve(-1.0, 1.0, 200, |x| steering_angle(x, &s))))
        }
        "tire_front" => {
            let t = params.tire?;
            let (lo, hi) = range(&data.x_column(0));
            Plot::new("Front tire", "alpha_f [rad]", "F_y,f [N]")
                .with(Series::points("data", scatter(data, 0)))
                .with(Series::line("fit", sample_curve(lo, hi, 200, |a| pacejka_lateral(a, &t))))
        }
        "tire_rear" => {
            let t = params.tire?;
            let (lo, hi) = range(&data.x_column(0));
            Plot::new("Rear tire", "alpha_r [rad]", "F_y,r [N]")
                .with(Series::points("data", scatter(data, 0)))
                .with(Series::line("fit", sample_curve(lo, hi, 2, |a| rear_lateral(a, t.c_r))))
        }
        _ => return None,
    };
    Some(plot)
}
