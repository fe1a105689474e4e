use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use encircle::harness::{self, ErrorReport, ScenarioConfig};
use encircle::{Error, Result};

#[derive(Parser)]
#[command(name = "encircle", version, about = "Range-only multi-target encirclement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario under many seeds, e.g. `--seeds 1..20` or `--seeds 3,5,8`.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyse a run directory.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        window: Option<usize>,
    },
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seed list {text:?}"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(harness::SEED_ENV) {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{} is not an unsigned integer: {v:?}", harness::SEED_ENV))),
        Err(_) => Ok(None),
    }
}

fn out_dir(flag: Option<PathBuf>) -> Result<PathBuf> {
    flag.or_else(|| std::env::var_os(harness::OUT_ENV).map(PathBuf::from))
        .ok_or_else(|| Error::Config(format!("no output directory: pass --out or set {}", harness::OUT_ENV)))
}

fn execute(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Run {
            config,
            seed,
            steps,
            out,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed.or(env_seed()?) {
                cfg.seed = s;
            }
            if let Some(k) = steps {
                cfg.steps = k;
            }
            let dir = out_dir(out)?;
            let run = harness::run_scenario(&cfg)?;
            harness::write_run(&dir, &cfg, &run)?;
            Ok(serde_json::to_value(&run.summary)?)
        }
        Command::Mc { config, seeds, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let seeds = parse_seeds(&seeds)?;
            let dir = out_dir(out)?;
            let report = harness::run_monte_carlo(&cfg, &seeds)?;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("mc.json"), serde_json::to_string_pretty(&report)?)?;
            Ok(serde_json::json!({
                "seeds": report.seeds.len(),
                "failed": report.failed,
                "pooled": report.pooled,
                "collision_violations": report.collision_violations,
            }))
        }
        Command::Analyze { log, window } => {
            let report = harness::analyze_dir(&log, window)?;
            std::fs::write(log.join("analysis.json"), serde_json::to_string_pretty(&report)?)?;
            Ok(serde_json::to_value(&report)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = ErrorReport::from(&e);
            eprintln!("{}", serde_json::json!({ "error": report }));
            ExitCode::from(2)
        }
    }
}
