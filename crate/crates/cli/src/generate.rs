use std::path::PathBuf;

use anyhow::{Context, Result};
use carid::sim::{scenario_library, synthesize_log, LibraryOptions, NoiseSpec};
use clap::Args;
use serde_json::json;

use crate::io::{read_complete_params, read_json, sha256_hex, to_json_pretty, write_file, RunManifest};
use crate::logs::{LogEntry, LogManifest, MANIFEST_FILE};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Vehicle parameter JSON used to simulate.
    #[arg(long)]
    pub params: PathBuf,
    /// Noise standard deviations (JSON object; any `seed` field is replaced by --seed).
    #[arg(long)]
    pub noise: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional scenario-library options (JSON); defaults otherwise.
    #[arg(long)]
    pub library: Option<PathBuf>,
}

/// Per-scenario seed, so adding a scenario does not reshuffle the others.
fn scenario_seed(seed: u64, name: &str) -> u64 {
    let digest = sha256_hex(format!("{seed}/{name}").as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

pub fn run(args: &GenerateArgs) -> Result<()> {
    let (_, params) = read_complete_params(&args.params)?;
    let mut noise: serde_json::Value = read_json(&args.noise)?;
    let obj = noise.as_object_mut().with_context(|| format!("{} must hold a JSON object", args.noise.display()))?;
    obj.insert("seed".into(), json!(args.seed));
    let noise: NoiseSpec = serde_json::from_value(noise).with_context(|| format!("invalid noise spec in {}", args.noise.display()))?;
    noise.validate()?;
    let library: LibraryOptions = match &args.library {
        Some(p) => read_json(p)?,
        None => LibraryOptions::default(),
    };

    let mut manifest = LogManifest { seed: Some(args.seed), logs: Vec::new() };
    let mut run = RunManifest::new(
        "generate",
        json!({ "params": args.params, "noise": args.noise, "seed": args.seed, "out": args.out, "library": args.library }),
    );
    run.seed = Some(args.seed);
    run.input(&args.params)?;
    run.input(&args.noise)?;
    if let Some(p) = &args.library {
        run.input(p)?;
    }

    for item in scenario_library(&library, &params) {
        let sc = &item.scenario;
        let spec = NoiseSpec { seed: scenario_seed(args.seed, &sc.name), ..noise.clone() };
        let log = synthesize_log(sc, &params, &spec).with_context(|| format!("scenario `{}`", sc.name))?;
        let rel = format!("{}/{}.csv", item.experiment, sc.name);
        let mut bytes = Vec::new();
        log.write_csv(&mut bytes)?;
        let path = args.out.join(&rel);
        write_file(&path, bytes)?;
        run.output(&path)?;
        manifest.logs.push(LogEntry { file: rel, experiment: item.experiment, scenario: Some(sc.clone()) });
    }
    let path = args.out.join(MANIFEST_FILE);
    write_file(&path, to_json_pretty(&manifest)?)?;
    run.output(&path)?;
    run.decisions = json!({
        "noise": noise,
        "library": library,
        "per_scenario_seed": "first 8 bytes of sha256(\"<seed>/<scenario name>\")",
        "logged_inputs": "commanded (pre-delay)",
        "mocap_pose": "centre of mass",
    });
    run.write(&args.out)?;
    eprintln!("wrote {} logs to {}", manifest.logs.len(), args.out.display());
    Ok(())
}
