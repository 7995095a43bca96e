//! `rotators`: command-line access to the simulator, the Fokker-Planck solver,
//! the linearized spectrum and the Monte Carlo experiments.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::{parse_value, Config};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(name = "rotators", version, about = "Mean-field plane rotators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synchronization degree, diffusion coefficient and the stationary profile.
    Stationary(Common),
    /// One particle simulation.
    Simulate(Common),
    /// One Fokker-Planck trajectory.
    Pde(Common),
    /// Spectrum of the linearization at the stationary profile.
    Spectrum(Common),
    /// Phase-diffusion experiment.
    Diffusion(Common),
    /// Fluctuation scaling with the particle number.
    Scaling(Common),
    /// Center selected when synchronizing from equally spaced phases.
    Emergence(Common),
    /// Lists the configuration keys of a subcommand.
    Keys { name: String },
}

#[derive(Args)]
struct Common {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides one configuration key, e.g. `--set n=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    seed: u64,
    version: String,
    started_unix: f64,
    finished_unix: f64,
    outputs: Vec<String>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn run(name: &str, common: Common) -> Result<(), String> {
    let started = now();
    let mut overrides = Vec::new();
    for s in &common.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got '{s}'"))?;
        overrides.push((k.trim().to_string(), parse_value(v.trim())));
    }
    if let Some(seed) = common.seed {
        let seed = i64::try_from(seed).map_err(|_| format!("seed must be at most {}", i64::MAX))?;
        overrides.push(("seed".into(), toml::Value::Integer(seed)));
    }
    if let Some(t) = common.threads {
        let t = i64::try_from(t).map_err(|_| "too many threads".to_string())?;
        overrides.push(("threads".into(), toml::Value::Integer(t)));
    }
    let cfg = Config::resolve(name, common.config.as_deref(), &overrides)?;
    let threads = cfg.usize("threads")?;
    if threads > 0 {
        // a pool built earlier in the process keeps its size
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    std::fs::create_dir_all(&common.out)
        .map_err(|e| format!("cannot create {}: {e}", common.out.display()))?;
    let out = common.out.as_path();
    let files = match name {
        "stationary" => commands::stationary(&cfg, out),
        "simulate" => commands::simulate(&cfg, out),
        "pde" => commands::pde_cmd(&cfg, out),
        "spectrum" => commands::spectrum(&cfg, out),
        "diffusion" => commands::diffusion(&cfg, out),
        "scaling" => commands::scaling(&cfg, out),
        "emergence" => commands::emergence(&cfg, out),
        _ => Err(format!("unknown command {name}")),
    }?;
    let manifest = RunManifest {
        command: name.to_string(),
        config: cfg.to_json(),
        seed: cfg.u64("seed")?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: now(),
        outputs: files.iter().map(|p| p.display().to_string()).collect(),
    };
    commands::write_json(out, "manifest.json", &manifest)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, common) = match cli.command {
        Command::Stationary(c) => ("stationary", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Pde(c) => ("pde", c),
        Command::Spectrum(c) => ("spectrum", c),
        Command::Diffusion(c) => ("diffusion", c),
        Command::Scaling(c) => ("scaling", c),
        Command::Emergence(c) => ("emergence", c),
        Command::Keys { name } => {
            println!("{}", config::describe(&name));
            return ExitCode::SUCCESS;
        }
    };
    match run(name, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
