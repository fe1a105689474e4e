//! Monte-Carlo batches: one scenario under many seeds, run in parallel.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::Quantiles;
use crate::error::{Error, Result};

use super::config::ScenarioConfig;
use super::run::{run_scenario_with, RunSummary};

/// Machine-readable description of a failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        let step = match e {
            Error::RunAborted { step, .. } => Some(*step),
            _ => None,
        };
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
            step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

/// Post-transient statistics of one target pooled over all successful seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledTarget {
    pub target_id: usize,
    pub samples: usize,
    pub ms_estimation: f64,
    pub ms_as: f64,
    pub occupancy: f64,
    pub estimation_quantiles: Option<Quantiles>,
    pub as_quantiles: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub name: String,
    pub seeds: Vec<u64>,
    pub failed: usize,
    pub runs: Vec<SeedResult>,
    pub pooled: Vec<PooledTarget>,
    pub collision_violations: usize,
    pub min_drone_distance: Option<f64>,
    pub min_obstacle_distance: Option<f64>,
    /// Per target, `(‖e‖², ‖ē‖²)` of every pooled step.
    #[serde(skip)]
    pub samples: BTreeMap<usize, Vec<(f64, f64)>>,
}

type Samples = BTreeMap<usize, Vec<(f64, f64)>>;

fn run_seed(cfg: &ScenarioConfig, seed: u64) -> (SeedResult, Samples) {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    let mut samples: Samples = BTreeMap::new();
    let transient = cfg.transient;
    let result = run_scenario_with(&cfg, |r| {
        if r.k >= transient {
            for row in &r.metrics.targets {
                samples
                    .entry(row.target_id)
                    .or_default()
                    .push((row.e_norm * row.e_norm, row.as_norm * row.as_norm));
            }
        }
        Ok(())
    });
    match result {
        Ok((summary, _)) => (
            SeedResult {
                seed,
                summary: Some(summary),
                error: None,
            },
            samples,
        ),
        Err(e) => (
            SeedResult {
                seed,
                summary: None,
                error: Some(ErrorReport::from(&e)),
            },
            BTreeMap::new(),
        ),
    }
}

/// Run `cfg` once per seed. A failing seed is recorded, not propagated.
pub fn run_monte_carlo(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<MonteCarloReport> {
    if seeds.is_empty() {
        return Err(Error::Config("Monte-Carlo batch needs at least one seed".into()));
    }
    cfg.validate()?;
    let results: Vec<(SeedResult, Samples)> = seeds.par_iter().map(|&s| run_seed(cfg, s)).collect();

    let mut samples: Samples = BTreeMap::new();
    let mut runs = Vec::with_capacity(results.len());
    for (run, s) in results {
        for (j, rows) in s {
            samples.entry(j).or_default().extend(rows);
        }
        runs.push(run);
    }
    let pooled = samples
        .iter()
        .map(|(&target_id, rows)| {
            let n = rows.len().max(1) as f64;
            let e: Vec<f64> = rows.iter().map(|r| r.0.sqrt()).collect();
            let a: Vec<f64> = rows.iter().map(|r| r.1.sqrt()).collect();
            PooledTarget {
                target_id,
                samples: rows.len(),
                ms_estimation: rows.iter().map(|r| r.0).sum::<f64>() / n,
                ms_as: rows.iter().map(|r| r.1).sum::<f64>() / n,
                occupancy: e.iter().filter(|x| **x <= cfg.error_threshold).count() as f64 / n,
                estimation_quantiles: Quantiles::of(&e),
                as_quantiles: Quantiles::of(&a),
            }
        })
        .collect();
    let summaries: Vec<&RunSummary> = runs.iter().filter_map(|r| r.summary.as_ref()).collect();
    let min_of = |f: &dyn Fn(&RunSummary) -> Option<f64>| summaries.iter().filter_map(|s| f(s)).reduce(f64::min);
    Ok(MonteCarloReport {
        name: cfg.name.clone(),
        seeds: seeds.to_vec(),
        failed: runs.iter().filter(|r| r.error.is_some()).count(),
        collision_violations: summaries
            .iter()
            .map(|s| s.audit.drone_violations.len() + s.audit.obstacle_violations.len())
            .sum(),
        min_drone_distance: min_of(&|s| s.audit.min_drone_distance),
        min_obstacle_distance: min_of(&|s| s.audit.min_obstacle_distance),
        runs,
        pooled,
        samples,
    })
}
