//! Run directories: JSON Lines step log, summary, CSV projection, and the
//! post-hoc analysis that reads them back.
//!
//! A run directory holds
//!
//! * `config.json`: the scenario as run,
//! * `steps.jsonl`: one [`StepRecord`] per line,
//! * `summary.json`: the [`RunSummary`],
//! * `metrics.csv`: `k`, per-target `‖e‖` and `‖ē‖`, minimum distances,
//! * `assignment.jsonl`: the assignment trace.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    self, AuditReport, BoundReport, ControllabilityReport, CovarianceReport, Quantiles, WindowSample,
};
use crate::error::Result;

use super::config::ScenarioConfig;
use super::run::{RunOutput, RunSummary, StepRecord};

pub const CONFIG_FILE: &str = "config.json";
pub const STEPS_FILE: &str = "steps.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TRACE_FILE: &str = "assignment.jsonl";

/// Write one step log as JSON Lines.
pub fn write_steps<W: Write>(records: &[StepRecord], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_steps<R: std::io::Read>(input: R) -> Result<Vec<StepRecord>> {
    let mut records = Vec::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// CSV projection of the step log.
pub fn write_metrics_csv<W: Write>(records: &[StepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let targets: Vec<usize> = records
        .first()
        .map(|r| r.metrics.targets.iter().map(|t| t.target_id).collect())
        .unwrap_or_default();
    let mut header = vec!["k".to_string()];
    for j in &targets {
        header.push(format!("e_norm_{j}"));
        header.push(format!("as_norm_{j}"));
    }
    header.push("min_drone_distance".into());
    header.push("min_obstacle_distance".into());
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let mut row = vec![r.k.to_string()];
        for j in &targets {
            match r.metrics.targets.iter().find(|t| t.target_id == *j) {
                Some(t) => {
                    row.push(t.e_norm.to_string());
                    row.push(t.as_norm.to_string());
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        row.push(opt(r.metrics.min_drone_distance));
        row.push(opt(r.metrics.min_obstacle_distance));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write all run files into `dir`, creating it if needed.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, run: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(CONFIG_FILE), serde_json::to_string_pretty(cfg)?)?;
    write_steps(&run.records, File::create(dir.join(STEPS_FILE))?)?;
    std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&run.summary)?)?;
    write_metrics_csv(&run.records, File::create(dir.join(METRICS_FILE))?)?;
    run.assignment.write_trace(BufWriter::new(File::create(dir.join(TRACE_FILE))?))?;
    Ok(())
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE))?)?)
}

/// Observability over all complete windows of one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramianSummary {
    pub target_id: usize,
    pub windows: usize,
    pub observable_windows: usize,
    /// Windows with at least four consecutive force-free instants.
    pub valid_windows: usize,
    pub observable_valid_windows: usize,
    pub min_eigenvalue: Option<f64>,
    pub max_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetQuantiles {
    pub target_id: usize,
    pub estimation: Option<Quantiles>,
    pub as_error: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub steps: usize,
    pub window: usize,
    pub gramians: Vec<GramianSummary>,
    pub controllability: Vec<ControllabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds_error: Option<String>,
    pub covariance: CovarianceReport,
    pub audit: AuditReport,
    pub quantiles: Vec<TargetQuantiles>,
    /// Largest `‖F·(x_i − x_g)‖²` over the run.
    pub c_check: f64,
}

fn longest_run(flags: &[bool]) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for &f in flags {
        cur = if f { cur + 1 } else { 0 };
        best = best.max(cur);
    }
    best
}

/// Gramian summary of one target over every window `[k − m1, k]`.
pub fn gramian_windows(records: &[StepRecord], target_id: usize, m1: usize, t: f64) -> Result<GramianSummary> {
    let mut samples: Vec<Option<WindowSample>> = Vec::with_capacity(records.len());
    let mut free = Vec::with_capacity(records.len());
    for r in records {
        let m = r.measurements.iter().find(|m| m.target_id == target_id);
        samples.push(m.filter(|m| m.measured && m.var_hat > 0.0).map(|m| WindowSample {
            baseline: m.baseline,
            var_hat: m.var_hat,
        }));
        let slot = r.assignment.iter().position(|p| p.target_id == target_id);
        free.push(slot.is_some_and(|s| r.force_free.get(s).copied().unwrap_or(false)));
    }
    let mut summary = GramianSummary {
        target_id,
        windows: 0,
        observable_windows: 0,
        valid_windows: 0,
        observable_valid_windows: 0,
        min_eigenvalue: None,
        max_eigenvalue: None,
    };
    let len = m1 + 1;
    if records.len() < len {
        return Ok(summary);
    }
    for end in len - 1..records.len() {
        let range = end + 1 - len..=end;
        let Some(window) = samples[range.clone()].iter().cloned().collect::<Option<Vec<_>>>() else {
            continue;
        };
        let report = analysis::observability_gramian(&window, t)?;
        summary.windows += 1;
        let valid = longest_run(&free[range]) >= 4;
        if report.observable {
            summary.observable_windows += 1;
        }
        if valid {
            summary.valid_windows += 1;
            if report.observable {
                summary.observable_valid_windows += 1;
            }
            summary.min_eigenvalue = Some(summary.min_eigenvalue.map_or(report.min_eigenvalue, |m| m.min(report.min_eigenvalue)));
            summary.max_eigenvalue = Some(summary.max_eigenvalue.map_or(report.max_eigenvalue, |m| m.max(report.max_eigenvalue)));
        }
    }
    Ok(summary)
}

/// Post-hoc analysis of an in-memory step log.
pub fn analyze_records(cfg: &ScenarioConfig, records: &[StepRecord], window: usize) -> Result<AnalysisReport> {
    let mats = cfg.mats()?;
    let targets: Vec<usize> = records
        .first()
        .map(|r| r.assignment.iter().map(|p| p.target_id).collect())
        .unwrap_or_default();
    let gramians = targets
        .iter()
        .map(|&j| gramian_windows(records, j, window, cfg.t))
        .collect::<Result<Vec<_>>>()?;
    let controllability = (0..cfg.targets.len())
        .map(|j| analysis::controllability_gramian(window, cfg.t, &cfg.target_noise(j)))
        .collect::<Result<Vec<_>>>()?;

    let mut samples: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    let mut e_norms: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut as_norms: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.k >= cfg.transient) {
        for row in &r.metrics.targets {
            samples.entry(row.target_id).or_default().push((row.e_norm.powi(2), row.as_norm.powi(2)));
            e_norms.entry(row.target_id).or_default().push(row.e_norm);
            as_norms.entry(row.target_id).or_default().push(row.as_norm);
        }
    }
    let q_check = (0..cfg.targets.len())
        .map(|j| nalgebra::SymmetricEigen::new(cfg.target_noise(j)).eigenvalues.max())
        .fold(0.0, f64::max);
    let (bounds, bounds_error) = match analysis::theorem_bounds(&samples, mats.a_hi(), cfg.t, q_check) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let covariance = analysis::covariance_report(
        records
            .iter()
            .flat_map(|r| r.estimates.iter())
            .filter(|e| e.zeta != nalgebra::Matrix4::zeros())
            .map(|e| &e.zeta),
    );
    let trajectory: Vec<_> = records.iter().map(|r| r.drones.clone()).collect();
    let audit = analysis::collision_audit(&trajectory, &cfg.obstacle_list(), &cfg.controller);
    let quantiles = e_norms
        .keys()
        .map(|&j| TargetQuantiles {
            target_id: j,
            estimation: Quantiles::of(&e_norms[&j]),
            as_error: as_norms.get(&j).and_then(|v| Quantiles::of(v)),
        })
        .collect();
    let c_check = records
        .iter()
        .flat_map(|r| r.measurements.iter())
        .map(|m| m.baseline.norm_squared())
        .fold(0.0, f64::max);
    Ok(AnalysisReport {
        steps: records.len(),
        window,
        gramians,
        controllability,
        bounds,
        bounds_error,
        covariance,
        audit,
        quantiles,
        c_check,
    })
}

/// Analyse a run directory written by [`write_run`].
pub fn analyze_dir(dir: &Path, window: Option<usize>) -> Result<AnalysisReport> {
    let cfg: ScenarioConfig = serde_json::from_str(&std::fs::read_to_string(dir.join(CONFIG_FILE))?)?;
    cfg.validate()?;
    let records = read_steps(File::open(dir.join(STEPS_FILE))?)?;
    analyze_records(&cfg, &records, window.unwrap_or(cfg.window))
}
