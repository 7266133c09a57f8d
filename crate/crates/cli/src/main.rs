use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use wz_cli::{replay, run, Experiment, RunConfig, RunError};

#[derive(Parser)]
#[command(
    name = "wzsim",
    version,
    about = "Discretized Schrödinger evolution experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Particle in a box compared with the series solution.
    BoxEvolve(RunArgs),
    /// RMSE sweep over cell width or time step.
    Convergence {
        #[arg(long, value_enum)]
        axis: Axis,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Clamped-nucleus molecule in two dimensions.
    Molecule2d(RunArgs),
    /// Measurement histogram of an evolved state.
    Sample(RunArgs),
    /// Kinetic gate counts and the synthesized diagonal circuit.
    SynthReport(RunArgs),
    /// Re-run a manifest and compare output hashes.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "./out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Spatial,
    Temporal,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "./out")]
    out: PathBuf,
    #[arg(long)]
    qubits: Option<u32>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    total_time: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    wall_height: Option<f64>,
    /// Override any config key, `key=json`; bare words are taken as strings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

fn resolve(args: &RunArgs, experiment: Experiment) -> Result<RunConfig, RunError> {
    let base = RunConfig::load(&args.config)?;
    let mut value = serde_json::to_value(&base).map_err(|e| RunError::Config(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .expect("config serializes to an object");
    let mut put = |k: &str, v: Value| {
        obj.insert(k.to_string(), v);
    };
    put(
        "experiment",
        serde_json::to_value(experiment).expect("experiment serializes"),
    );
    if let Some(n) = args.qubits {
        put("qubits_per_axis", n.into());
    }
    if let Some(s) = args.steps {
        put("steps", s.into());
    }
    if let Some(t) = args.total_time {
        put("total_time", t.into());
    }
    if let Some(s) = args.seed {
        put("seed", s.into());
    }
    if let Some(s) = args.shots {
        put("shots", s.into());
    }
    if let Some(v) = args.wall_height {
        put("wall_height", v.into());
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| RunError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        put(k.trim(), parse_value(v.trim()));
    }
    serde_json::from_value(value).map_err(|e| RunError::Config(format!("override: {e}")))
}

fn threads_from_env() -> Result<(), RunError> {
    let Ok(raw) = std::env::var("WZ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        RunError::Config(format!(
            "WZ_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    if n == 0 {
        return Err(RunError::Config("WZ_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| RunError::Config(e.to_string()))
}

fn run_with(args: &RunArgs, experiment: Experiment) -> Result<(), RunError> {
    let config = resolve(args, experiment)?;
    let out: &Path = match (&config.out_dir, args.out.as_os_str() == "./out") {
        (Some(dir), true) => Path::new(dir),
        _ => &args.out,
    };
    let result = run(&config, out)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&result.summary).unwrap_or_default()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    threads_from_env()?;
    match cli.command {
        Command::BoxEvolve(a) => run_with(&a, Experiment::BoxEvolve),
        Command::Convergence { axis, run } => run_with(
            &run,
            match axis {
                Axis::Spatial => Experiment::ConvergenceSpatial,
                Axis::Temporal => Experiment::ConvergenceTemporal,
            },
        ),
        Command::Molecule2d(a) => run_with(&a, Experiment::Molecule2d),
        Command::Sample(a) => run_with(&a, Experiment::Sample),
        Command::SynthReport(a) => run_with(&a, Experiment::SynthReport),
        Command::Replay { manifest, out } => {
            let report = replay(&manifest, &out)?;
            if report.identical() {
                println!("replay matches {}", manifest.display());
                Ok(())
            } else {
                Err(RunError::Numerical(format!(
                    "replay differs in: {}",
                    report.mismatches.join(", ")
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wzsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
