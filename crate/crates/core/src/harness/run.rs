//! The per-step pipeline: sense, assign, estimate, control, step the world.

use std::collections::BTreeMap;

use nalgebra::{Matrix4, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, AuditReport, MetricsFrame, Quantiles};
use crate::assignment::{run_assignment, AssignmentInput, AssignmentOutcome};
use crate::controller::{
    accel_command, action_radius, apply_caps, attractive_force, interaction_force, repulsive_force,
    ForceBreakdown, ForceLog, Role,
};
use crate::error::{Error, Result};
use crate::estimator::{build_measurement, dtse_update, init_estimator, predict_only, EstimatorState};
use crate::model::{step_drone, step_target, DroneState, TargetState};
use crate::noise::{NoiseStream, StreamKind};
use crate::sensing::{measure_batch, neighbor_set, visible_obstacles, visible_targets, RangeBatch, SensorConfig};

use super::config::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub target_id: usize,
    pub i_side: usize,
    pub g_side: usize,
}

/// Target estimate in use by the controller at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub target_id: usize,
    pub eta_hat: Vector4<f64>,
    pub zeta: Matrix4<f64>,
    pub trace_zeta: f64,
    pub min_eig_zeta: f64,
}

/// The pair measurement of one target at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSummary {
    pub target_id: usize,
    /// Both drones of the pair had the target in range.
    pub measured: bool,
    pub theta: f64,
    pub var_hat: f64,
    /// `F·(x_i − x_g)`.
    pub baseline: Vector2<f64>,
    pub clamped: bool,
    pub degenerate: bool,
}

/// One line of the step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub drones: Vec<DroneState>,
    pub targets: Vec<TargetState>,
    pub assignment: Vec<PairRecord>,
    pub measurements: Vec<MeasurementSummary>,
    pub estimates: Vec<EstimateRecord>,
    pub forces: Vec<ForceLog>,
    /// Driving noise applied to each target after this step.
    pub omega: Vec<Vector2<f64>>,
    /// Per target: neither pair drone felt interaction or repulsion.
    pub force_free: Vec<bool>,
    /// Largest `|z − z(0)|` over the drones.
    pub z_drift: f64,
    pub metrics: MetricsFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub target_id: usize,
    pub pair: (usize, usize),
    pub samples: usize,
    pub ms_estimation: f64,
    pub ms_as: f64,
    /// Fraction of post-transient steps with `‖e‖` within the threshold.
    pub occupancy: f64,
    /// Same, on the position part of `e` only.
    pub position_occupancy: f64,
    pub estimation_quantiles: Option<Quantiles>,
    pub as_quantiles: Option<Quantiles>,
    pub longest_force_free_streak: usize,
    /// Largest `‖F·(x_i − x_g)‖²` seen.
    pub max_baseline_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub steps: usize,
    pub transient: usize,
    pub error_threshold: f64,
    pub assignment_rounds: usize,
    pub targets: Vec<TargetSummary>,
    pub audit: AuditReport,
    pub max_z_drift: f64,
    /// Steps on which any drone felt interaction or repulsion.
    pub avoidance_steps: usize,
    pub cap_events: usize,
    pub saturation_events: usize,
    pub clamped_variances: usize,
    /// SHA-256 of the JSON Lines step log.
    pub log_hash: String,
}

/// A finished run held in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
    pub assignment: AssignmentOutcome,
}

fn abort(step: usize) -> impl Fn(Error) -> Error {
    move |e| Error::RunAborted {
        step,
        source: Box::new(e),
    }
}

fn sense(
    cfg: &ScenarioConfig,
    draw: &SensorConfig,
    drones: &[DroneState],
    targets: &[TargetState],
    k: usize,
) -> Result<BTreeMap<(usize, usize), RangeBatch>> {
    let mut batches = BTreeMap::new();
    for d in drones {
        for j in visible_targets(d, targets, &cfg.sensor) {
            let mut noise = NoiseStream::substream(cfg.seed, StreamKind::Range, d.id as u64, j as u64, k as u64);
            batches.insert((d.id, j), measure_batch(d, &targets[j], draw, k, &mut noise)?);
        }
    }
    Ok(batches)
}

fn assign(
    cfg: &ScenarioConfig,
    drones: &[DroneState],
    batches: &BTreeMap<(usize, usize), RangeBatch>,
) -> Result<AssignmentOutcome> {
    let distances = drones
        .iter()
        .map(|d| {
            batches
                .range((d.id, 0)..(d.id + 1, 0))
                .map(|(&(_, j), b)| (j, b.mean()))
                .collect()
        })
        .collect();
    let neighbors = drones.iter().map(|d| neighbor_set(d, drones, &cfg.sensor)).collect();
    let input = AssignmentInput {
        targets: cfg.targets.len(),
        distances,
        neighbors,
    };
    run_assignment(&input, &cfg.assignment)
}

fn omega_for(cfg: &ScenarioConfig, j: usize, k: usize) -> Vector2<f64> {
    if let Some(script) = &cfg.scripted_omega {
        return Vector2::from(script[k][j]);
    }
    if !cfg.flags.noise {
        return Vector2::zeros();
    }
    let mut noise = NoiseStream::substream(cfg.seed, StreamKind::Process, j as u64, 0, k as u64);
    let z = Vector2::new(noise.standard_normal(), noise.standard_normal());
    let l = cfg
        .target_noise(j)
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(nalgebra::Matrix2::zeros);
    l * z
}

fn estimate_record(target_id: usize, eta_hat: Vector4<f64>, zeta: Matrix4<f64>) -> EstimateRecord {
    let ev = nalgebra::SymmetricEigen::new(zeta).eigenvalues;
    EstimateRecord {
        target_id,
        eta_hat,
        zeta,
        trace_zeta: zeta.trace(),
        min_eig_zeta: ev.min(),
    }
}

#[derive(Default)]
struct Accumulator {
    e_norm: BTreeMap<usize, Vec<f64>>,
    e_pos_norm: BTreeMap<usize, Vec<f64>>,
    as_norm: BTreeMap<usize, Vec<f64>>,
    streak: BTreeMap<usize, usize>,
    longest: BTreeMap<usize, usize>,
    max_baseline_sq: BTreeMap<usize, f64>,
    trajectory: Vec<Vec<DroneState>>,
    max_z_drift: f64,
    avoidance_steps: usize,
    cap_events: usize,
    saturation_events: usize,
    clamped_variances: usize,
}

/// Run a scenario, handing each step record to `sink` as it is produced.
pub fn run_scenario_with<F>(cfg: &ScenarioConfig, mut sink: F) -> Result<(RunSummary, AssignmentOutcome)>
where
    F: FnMut(&StepRecord) -> Result<()>,
{
    cfg.validate()?;
    let mats = cfg.mats()?;
    let draw = if cfg.flags.noise {
        cfg.sensor
    } else {
        SensorConfig { q: 0.0, ..cfg.sensor }
    };
    let obstacles = cfg.obstacle_list();
    let mut drones = cfg.initial_drones();
    let mut targets = cfg.initial_targets();
    let z0: Vec<f64> = drones.iter().map(|d| d.position.z).collect();
    let zeta0 = cfg.zeta0();
    let q_filter = cfg.sensor.q;

    let mut outcome: Option<AssignmentOutcome> = None;
    let mut filters: BTreeMap<usize, EstimatorState> = BTreeMap::new();
    let mut acc = Accumulator::default();
    let mut hasher = Sha256::new();

    for k in 0..cfg.steps {
        let fail = abort(k);
        // (1) sensing
        let batches = sense(cfg, &draw, &drones, &targets, k).map_err(&fail)?;

        // (2) assignment, once
        if outcome.is_none() {
            outcome = Some(assign(cfg, &drones, &batches).map_err(&fail)?);
        }
        let pairs = &outcome.as_ref().expect("assignment ran").pairs;
        let pair_records: Vec<PairRecord> = pairs
            .iter()
            .map(|(&j, &(i, g))| PairRecord {
                target_id: j,
                i_side: i,
                g_side: g,
            })
            .collect();

        // (3) estimation
        let mut measurements = Vec::new();
        let mut in_use: BTreeMap<usize, Vector4<f64>> = BTreeMap::new();
        let mut estimates = Vec::new();
        for (&j, &(i, g)) in pairs {
            let pair_batches = (batches.get(&(i, j)), batches.get(&(g, j)));
            let meas = match pair_batches {
                (Some(bi), Some(bg)) => Some(
                    build_measurement(bi, q_filter, &drones[i].position, bg, q_filter, &drones[g].position)
                        .map_err(&fail)?,
                ),
                _ => None,
            };
            let baseline = drones[i].ground() - drones[g].ground();
            measurements.push(MeasurementSummary {
                target_id: j,
                measured: meas.is_some(),
                theta: meas.as_ref().map_or(0.0, |m| m.theta),
                var_hat: meas.as_ref().map_or(0.0, |m| m.var_hat),
                baseline,
                clamped: meas.as_ref().is_some_and(|m| m.clamped),
                degenerate: meas.as_ref().is_some_and(|m| m.degenerate),
            });
            if meas.as_ref().is_some_and(|m| m.clamped) {
                acc.clamped_variances += 1;
            }
            let slot = acc.max_baseline_sq.entry(j).or_insert(0.0);
            *slot = slot.max(baseline.norm_squared());

            if cfg.flags.perfect_estimate {
                let eta = targets[j].eta();
                in_use.insert(j, eta);
                estimates.push(estimate_record(j, eta, Matrix4::zeros()));
                continue;
            }
            let next = match (filters.get(&j), pair_batches, &meas) {
                (None, (Some(bi), Some(bg)), _) => {
                    init_estimator(bi, &drones[i].position, bg, &drones[g].position, &zeta0).map_err(&fail)?
                }
                (None, _, _) => {
                    return Err(fail(Error::ModelInput(format!(
                        "target {j} is not in range of both assigned drones at the first step"
                    ))))
                }
                (Some(prev), _, Some(m)) => dtse_update(prev, m, &cfg.target_noise(j), &mats).map_err(&fail)?,
                (Some(prev), _, None) => predict_only(prev, &cfg.target_noise(j), &mats),
            };
            in_use.insert(j, next.eta_hat);
            estimates.push(estimate_record(j, next.eta_hat, next.zeta));
            filters.insert(j, next);
        }

        // (4) forces and caps, (5) commands
        let shape = cfg.shape.offset(k);
        let mut forces = Vec::with_capacity(drones.len());
        let mut commands = Vec::with_capacity(drones.len());
        let mut any_avoidance = false;
        for drone in &drones {
            let assigned = pairs.iter().find(|(_, &(i, g))| i == drone.id || g == drone.id);
            let fb = match assigned {
                None => ForceBreakdown::new(Vector3::zeros(), Vector3::zeros(), Vector3::zeros()),
                Some((&j, &(i, g))) => {
                    let partner = if drone.id == i { g } else { i };
                    let eta = in_use[&j];
                    let s_hat = Vector2::new(eta[0], eta[1]);
                    let nu_hat = Vector2::new(eta[2], eta[3]);
                    let role = Role::for_pair(drone.id, partner);
                    let at = attractive_force(role, &drone.position, &s_hat, &nu_hat, &shape, &mats);
                    if cfg.flags.attractive_only {
                        ForceBreakdown::new(at, Vector3::zeros(), Vector3::zeros())
                    } else {
                        let r_bar = action_radius(&nu_hat, &cfg.controller, &mats);
                        let neighbors: Vec<Vector3<f64>> = neighbor_set(drone, &drones, &cfg.sensor)
                            .into_iter()
                            .map(|g| drones[g].position)
                            .collect();
                        let seen: Vec<Vector3<f64>> = visible_obstacles(drone, &obstacles, &cfg.sensor)
                            .into_iter()
                            .map(|o| *o.position())
                            .collect();
                        let partner_sees = visible_targets(&drones[partner], &targets, &cfg.sensor);
                        let others: Vec<Vector2<f64>> = visible_targets(drone, &targets, &cfg.sensor)
                            .into_iter()
                            .filter(|h| *h != j && partner_sees.contains(h))
                            .filter_map(|h| in_use.get(&h).map(|e| Vector2::new(e[0], e[1])))
                            .collect();
                        let inter = interaction_force(&drone.position, &neighbors, &cfg.controller, r_bar);
                        let rep = repulsive_force(&drone.position, &seen, &others, &cfg.controller, r_bar);
                        apply_caps(&ForceBreakdown::new(at, inter, rep), &cfg.controller)
                    }
                }
            };
            let u = accel_command(&fb, &drone.velocity, &cfg.controller, &mats);
            let raw = fb.resultant - drone.velocity * (2.0 / mats.t());
            if u != raw {
                acc.saturation_events += 1;
            }
            if !fb.is_force_free() {
                any_avoidance = true;
            }
            if fb.inter_cap_fired || fb.rep_cap_fired {
                acc.cap_events += 1;
            }
            forces.push(ForceLog {
                k,
                drone_id: drone.id,
                forces: fb,
                u,
            });
            commands.push(u);
        }
        if any_avoidance {
            acc.avoidance_steps += 1;
        }
        let force_free: Vec<bool> = pairs
            .values()
            .map(|&(i, g)| forces[i].forces.is_force_free() && forces[g].forces.is_force_free())
            .collect();
        for (&j, &free) in pairs.keys().zip(&force_free) {
            let streak = acc.streak.entry(j).or_insert(0);
            *streak = if free { *streak + 1 } else { 0 };
            let longest = acc.longest.entry(j).or_insert(0);
            *longest = (*longest).max(*streak);
        }

        let omega: Vec<Vector2<f64>> = (0..targets.len()).map(|j| omega_for(cfg, j, k)).collect();
        let z_drift = drones
            .iter()
            .zip(&z0)
            .map(|(d, z)| (d.position.z - z).abs())
            .fold(0.0, f64::max);
        acc.max_z_drift = acc.max_z_drift.max(z_drift);

        let metric_pairs: BTreeMap<usize, (usize, usize)> = pairs.clone();
        let metrics = analysis::metrics_frame(k, &targets, &in_use, &metric_pairs, &drones, &obstacles);
        if k >= cfg.transient {
            for row in &metrics.targets {
                acc.e_norm.entry(row.target_id).or_default().push(row.e_norm);
                acc.e_pos_norm.entry(row.target_id).or_default().push(row.e_pos_norm);
                acc.as_norm.entry(row.target_id).or_default().push(row.as_norm);
            }
        }
        acc.trajectory.push(drones.clone());

        let record = StepRecord {
            k,
            drones: drones.clone(),
            targets: targets.clone(),
            assignment: pair_records,
            measurements,
            estimates,
            forces,
            omega: omega.clone(),
            force_free,
            z_drift,
            metrics,
        };
        let line = serde_json::to_vec(&record)?;
        hasher.update(&line);
        hasher.update(b"\n");
        sink(&record).map_err(&fail)?;

        // (6) world step
        for (d, u) in drones.iter_mut().zip(&commands) {
            *d = step_drone(d, u, &mats).map_err(&fail)?;
        }
        for (s, w) in targets.iter_mut().zip(&omega) {
            *s = step_target(s, w, &mats).map_err(&fail)?;
        }
    }

    let outcome = outcome.expect("at least one step ran");
    let summary = summarize(cfg, &outcome, acc, &obstacles, hex::encode(hasher.finalize()));
    Ok((summary, outcome))
}

fn summarize(
    cfg: &ScenarioConfig,
    outcome: &AssignmentOutcome,
    acc: Accumulator,
    obstacles: &[crate::model::Obstacle],
    log_hash: String,
) -> RunSummary {
    let targets = outcome
        .pairs
        .iter()
        .map(|(&j, &pair)| {
            let e = acc.e_norm.get(&j).cloned().unwrap_or_default();
            let e_pos = acc.e_pos_norm.get(&j).cloned().unwrap_or_default();
            let a = acc.as_norm.get(&j).cloned().unwrap_or_default();
            let n = e.len().max(1) as f64;
            let within = |v: &[f64]| v.iter().filter(|x| **x <= cfg.error_threshold).count() as f64 / v.len().max(1) as f64;
            TargetSummary {
                target_id: j,
                pair,
                samples: e.len(),
                ms_estimation: e.iter().map(|x| x * x).sum::<f64>() / n,
                ms_as: a.iter().map(|x| x * x).sum::<f64>() / n,
                occupancy: within(&e),
                position_occupancy: within(&e_pos),
                estimation_quantiles: Quantiles::of(&e),
                as_quantiles: Quantiles::of(&a),
                longest_force_free_streak: acc.longest.get(&j).copied().unwrap_or(0),
                max_baseline_sq: acc.max_baseline_sq.get(&j).copied().unwrap_or(0.0),
            }
        })
        .collect();
    RunSummary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        steps: cfg.steps,
        transient: cfg.transient,
        error_threshold: cfg.error_threshold,
        assignment_rounds: outcome.rounds,
        targets,
        audit: analysis::collision_audit(&acc.trajectory, obstacles, &cfg.controller),
        max_z_drift: acc.max_z_drift,
        avoidance_steps: acc.avoidance_steps,
        cap_events: acc.cap_events,
        saturation_events: acc.saturation_events,
        clamped_variances: acc.clamped_variances,
        log_hash,
    }
}

/// Run a scenario and keep every step record.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut records = Vec::with_capacity(cfg.steps);
    let (summary, assignment) = run_scenario_with(cfg, |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok(RunOutput {
        records,
        summary,
        assignment,
    })
}
