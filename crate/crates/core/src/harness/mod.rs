//! Scenario configuration, the deterministic stepper, run directories and
//! Monte-Carlo batches.
//!
//! ```no_run
//! use encircle::harness::{run_scenario, ScenarioConfig};
//!
//! let run = run_scenario(&ScenarioConfig::golden())?;
//! println!("log hash {}", run.summary.log_hash);
//! # Ok::<(), encircle::Error>(())
//! ```

mod config;
mod mc;
mod output;
mod run;

pub use config::{DroneInit, Flags, ObstacleInit, ScenarioConfig, TargetInit, GOLDEN_OBSTACLES};
pub use mc::{run_monte_carlo, ErrorReport, MonteCarloReport, PooledTarget, SeedResult};
pub use output::{
    analyze_dir, analyze_records, file_hash, gramian_windows, read_steps, read_summary, write_metrics_csv, write_run,
    write_steps, AnalysisReport, GramianSummary, TargetQuantiles, CONFIG_FILE, METRICS_FILE, STEPS_FILE,
    SUMMARY_FILE, TRACE_FILE,
};
pub use run::{
    run_scenario, run_scenario_with, EstimateRecord, MeasurementSummary, PairRecord, RunOutput, RunSummary,
    StepRecord, TargetSummary,
};

/// Environment variable overriding the scenario seed.
pub const SEED_ENV: &str = "ENCIRCLE_SEED";
/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "ENCIRCLE_OUT";
