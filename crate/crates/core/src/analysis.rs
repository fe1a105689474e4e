//! Diagnostics over completed runs: error metrics, Gramians, bound checks and
//! the collision audit.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2, Matrix4, SymmetricEigen, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::controller::ControllerParams;
use crate::error::{Error, Result};
use crate::model::{DroneState, Obstacle, PresetShape, TargetState};

/// Singular values below `RANK_TOLERANCE · σ_max` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Eigenvalues at or below this are not positive.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Largest admitted covariance condition number.
pub const CONDITION_CEILING: f64 = 1e8;

/// Errors of one target at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub target_id: usize,
    /// `η − η̂`.
    pub e: Vector4<f64>,
    pub e_norm: f64,
    /// Position part of `e`.
    pub e_pos_norm: f64,
    /// `p_i + p_g` of the encircling pair.
    pub as_error: Vector2<f64>,
    pub as_norm: f64,
    /// Pair baseline `F·(x_i − x_g)`.
    pub baseline: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    pub k: usize,
    pub targets: Vec<TargetMetrics>,
    pub min_drone_distance: Option<f64>,
    pub min_obstacle_distance: Option<f64>,
}

/// Minimum pairwise 3-D drone distance.
pub fn min_pairwise_distance(positions: &[Vector3<f64>]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (a, pa) in positions.iter().enumerate() {
        for pb in &positions[a + 1..] {
            let d = (pa - pb).norm();
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    }
    best
}

/// Minimum drone-obstacle distance.
pub fn min_obstacle_distance(positions: &[Vector3<f64>], obstacles: &[Obstacle]) -> Option<f64> {
    positions
        .iter()
        .flat_map(|p| obstacles.iter().map(move |o| (p - o.position()).norm()))
        .reduce(f64::min)
}

/// Error metrics for one instant.
///
/// `estimates` is indexed by target id; `pairs` maps target id to its
/// `(i-side, g-side)` drone ids.
pub fn metrics_frame(
    k: usize,
    targets: &[TargetState],
    estimates: &BTreeMap<usize, Vector4<f64>>,
    pairs: &BTreeMap<usize, (usize, usize)>,
    drones: &[DroneState],
    obstacles: &[Obstacle],
) -> MetricsFrame {
    let by_id: BTreeMap<usize, &DroneState> = drones.iter().map(|d| (d.id, d)).collect();
    let mut rows = Vec::new();
    for target in targets {
        let (Some(est), Some(&(i, g))) = (estimates.get(&target.id), pairs.get(&target.id)) else {
            continue;
        };
        let (Some(di), Some(dg)) = (by_id.get(&i), by_id.get(&g)) else {
            continue;
        };
        let e = target.eta() - est;
        let p_i = di.ground() - target.position;
        let p_g = dg.ground() - target.position;
        let as_error = p_i + p_g;
        rows.push(TargetMetrics {
            target_id: target.id,
            e,
            e_norm: e.norm(),
            e_pos_norm: e.fixed_rows::<2>(0).norm(),
            as_error,
            as_norm: as_error.norm(),
            baseline: p_i - p_g,
        });
    }
    let positions: Vec<Vector3<f64>> = drones.iter().map(|d| d.position).collect();
    MetricsFrame {
        k,
        targets: rows,
        min_drone_distance: min_pairwise_distance(&positions),
        min_obstacle_distance: min_obstacle_distance(&positions, obstacles),
    }
}

/// Windowed observability of one target filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub window: usize,
    pub o2: DMatrix<f64>,
    pub o1: Matrix4<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Eigenvalues of `O1` as computed, ascending.
    pub eigenvalues_raw: Vec<f64>,
    /// Smallest eigenvalue with roundoff negatives clipped to zero.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub observable: bool,
}

/// One measurement instant inside a Gramian window: pair baseline and `Υ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub baseline: Vector2<f64>,
    pub var_hat: f64,
}

fn numerical_rank(singular_values: &[f64]) -> usize {
    let max = singular_values.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

fn sorted_eigenvalues(m: &Matrix4<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(*m).eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Observability Gramian over a chronological window (oldest first).
///
/// Each instant `k − m` contributes the row `−2·[bᵀ, −m·t·bᵀ]`, the range
/// difference row propagated back from the newest state.
pub fn observability_gramian(window: &[WindowSample], t: f64) -> Result<ObservabilityReport> {
    if window.is_empty() {
        return Err(Error::Analysis("observability window is empty".into()));
    }
    if let Some(bad) = window.iter().find(|w| !(w.var_hat > 0.0)) {
        return Err(Error::Analysis(format!("window variance must be positive, got {}", bad.var_hat)));
    }
    let n = window.len();
    let mut o2 = DMatrix::zeros(n, 4);
    let mut o1 = Matrix4::zeros();
    for (row, sample) in window.iter().enumerate() {
        let m = (n - 1 - row) as f64;
        let b = sample.baseline;
        let r = Vector4::new(-2.0 * b.x, -2.0 * b.y, 2.0 * m * t * b.x, 2.0 * m * t * b.y);
        for c in 0..4 {
            o2[(row, c)] = r[c];
        }
        o1 += r * r.transpose() / sample.var_hat;
    }
    let o1 = (o1 + o1.transpose()) * 0.5;
    let singular_values: Vec<f64> = o2.clone().svd(false, false).singular_values.iter().cloned().collect();
    let rank = numerical_rank(&singular_values);
    let eigenvalues_raw = sorted_eigenvalues(&o1);
    let min_eigenvalue = eigenvalues_raw[0].max(0.0);
    let max_eigenvalue = eigenvalues_raw[3].max(0.0);
    Ok(ObservabilityReport {
        window: n,
        o2,
        o1,
        singular_values,
        rank,
        eigenvalues_raw,
        min_eigenvalue,
        max_eigenvalue,
        observable: rank == 4 && min_eigenvalue > EIGEN_FLOOR,
    })
}

/// Window of pair baselines for a pair sitting exactly on the preset shape,
/// ending at instant `k_end`.
pub fn on_shape_window(shape: &PresetShape, k_end: usize, len: usize, var_hat: f64) -> Vec<WindowSample> {
    (k_end + 1 - len..=k_end)
        .map(|k| WindowSample {
            baseline: shape.offset(k) * 2.0,
            var_hat,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllabilityReport {
    pub m1: usize,
    pub h2: DMatrix<f64>,
    pub gramian: Matrix4<f64>,
    pub eigenvalues: Vec<f64>,
    pub positive_definite: bool,
}

/// Controllability Gramian `H2·diag(Q,…,Q)·H2ᵀ` of the target model.
pub fn controllability_gramian(m1: usize, t: f64, q: &Matrix2<f64>) -> Result<ControllabilityReport> {
    if m1 < 1 {
        return Err(Error::Config("controllability window needs m1 >= 1".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Config(format!("sampling period must be positive, got {t}")));
    }
    let cols = 2 * (m1 + 1);
    let mut h2 = DMatrix::zeros(4, cols);
    for m in 0..=m1 {
        let pos = (2 * m + 1) as f64 * t * t / 2.0;
        for a in 0..2 {
            h2[(a, 2 * m + a)] = pos;
            h2[(2 + a, 2 * m + a)] = t;
        }
    }
    let mut q_hat = DMatrix::zeros(cols, cols);
    for m in 0..=m1 {
        q_hat.view_mut((2 * m, 2 * m), (2, 2)).copy_from(q);
    }
    let g = &h2 * q_hat * h2.transpose();
    let gramian = Matrix4::from_fn(|r, c| 0.5 * (g[(r, c)] + g[(c, r)]));
    let eigenvalues = sorted_eigenvalues(&gramian);
    let positive_definite = eigenvalues[0] > EIGEN_FLOOR;
    let q_pd = q.cholesky().is_some() && (q - q.transpose()).abs().max() <= 1e-12;
    if !q_pd {
        return Err(Error::Config("process noise covariance must be symmetric positive definite".into()));
    }
    Ok(ControllabilityReport {
        m1,
        h2,
        gramian,
        eigenvalues,
        positive_definite,
    })
}

/// Controllability Gramian without the `Q` check, for degenerate inspections.
pub fn controllability_gramian_unchecked(m1: usize, t: f64, q: &Matrix2<f64>) -> Matrix4<f64> {
    let mut g = Matrix4::zeros();
    for m in 0..=m1 {
        let pos = (2 * m + 1) as f64 * t * t / 2.0;
        let h = nalgebra::Matrix4x2::new(pos, 0.0, 0.0, pos, t, 0.0, 0.0, t);
        g += h * q * h.transpose();
    }
    g
}

/// Per-target mean-square bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetBound {
    pub target_id: usize,
    pub samples: usize,
    /// Mean-square estimation error, the empirical `δ₁`.
    pub ms_estimation: f64,
    pub ms_as: f64,
    /// `4·a_hi·δ₁ + 2t⁴·q̌`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub a_hi: f64,
    pub t: f64,
    pub q_check: f64,
    pub noise_term: f64,
    pub targets: Vec<TargetBound>,
    pub all_hold: bool,
}

/// Minimum post-transient samples per target for [`theorem_bounds`].
pub const MIN_BOUND_SAMPLES: usize = 1000;

/// Check `MS‖ē‖² ≤ 4·a_hi·MS‖e‖² + 2t⁴·q̌` per target over pooled samples.
///
/// `samples` maps a target id to `(‖e‖², ‖ē‖²)` pairs.
pub fn theorem_bounds(
    samples: &BTreeMap<usize, Vec<(f64, f64)>>,
    a_hi: f64,
    t: f64,
    q_check: f64,
) -> Result<BoundReport> {
    let noise_term = 2.0 * t.powi(4) * q_check;
    let mut targets = Vec::new();
    for (&target_id, rows) in samples {
        if rows.len() < MIN_BOUND_SAMPLES {
            return Err(Error::Analysis(format!(
                "target {target_id} has {} post-transient samples, need {MIN_BOUND_SAMPLES}",
                rows.len()
            )));
        }
        let n = rows.len() as f64;
        let ms_estimation = rows.iter().map(|r| r.0).sum::<f64>() / n;
        let ms_as = rows.iter().map(|r| r.1).sum::<f64>() / n;
        let bound = 4.0 * a_hi * ms_estimation + noise_term;
        targets.push(TargetBound {
            target_id,
            samples: rows.len(),
            ms_estimation,
            ms_as,
            bound,
            holds: ms_as <= bound,
        });
    }
    if targets.is_empty() {
        return Err(Error::Analysis("no targets to bound".into()));
    }
    let all_hold = targets.iter().all(|t| t.holds);
    Ok(BoundReport {
        a_hi,
        t,
        q_check,
        noise_term,
        targets,
        all_hold,
    })
}

/// Eigen range of a sequence of error covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub samples: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_condition: f64,
    pub all_positive_definite: bool,
    pub within_condition_ceiling: bool,
}

pub fn covariance_report<'a>(zetas: impl IntoIterator<Item = &'a Matrix4<f64>>) -> CovarianceReport {
    let mut report = CovarianceReport {
        samples: 0,
        min_eigenvalue: f64::INFINITY,
        max_eigenvalue: f64::NEG_INFINITY,
        max_condition: 0.0,
        all_positive_definite: true,
        within_condition_ceiling: true,
    };
    for z in zetas {
        let ev = sorted_eigenvalues(z);
        report.samples += 1;
        report.min_eigenvalue = report.min_eigenvalue.min(ev[0]);
        report.max_eigenvalue = report.max_eigenvalue.max(ev[3]);
        if ev[0] <= 0.0 {
            report.all_positive_definite = false;
        } else {
            report.max_condition = report.max_condition.max(ev[3] / ev[0]);
        }
    }
    report.within_condition_ceiling = report.all_positive_definite && report.max_condition <= CONDITION_CEILING;
    report
}

/// An instant where two bodies came closer than allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: usize,
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub steps: usize,
    pub min_drone_distance: Option<f64>,
    pub min_obstacle_distance: Option<f64>,
    /// Drone pairs closer than `2ã`.
    pub drone_violations: Vec<Violation>,
    /// Drone-obstacle pairs closer than `r̃`.
    pub obstacle_violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.drone_violations.is_empty() && self.obstacle_violations.is_empty()
    }
}

/// Audit a trajectory given as per-step drone snapshots.
pub fn collision_audit(trajectory: &[Vec<DroneState>], obstacles: &[Obstacle], params: &ControllerParams) -> AuditReport {
    let mut report = AuditReport {
        steps: trajectory.len(),
        min_drone_distance: None,
        min_obstacle_distance: None,
        drone_violations: Vec::new(),
        obstacle_violations: Vec::new(),
    };
    let fold = |slot: &mut Option<f64>, d: f64| *slot = Some(slot.map_or(d, |m| m.min(d)));
    for (k, drones) in trajectory.iter().enumerate() {
        for (a, da) in drones.iter().enumerate() {
            for db in &drones[a + 1..] {
                let d = (da.position - db.position).norm();
                fold(&mut report.min_drone_distance, d);
                if d < 2.0 * params.drone_radius {
                    report.drone_violations.push(Violation { k, a: da.id, b: db.id, distance: d });
                }
            }
            for o in obstacles {
                let d = (da.position - o.position()).norm();
                fold(&mut report.min_obstacle_distance, d);
                if d < params.r_safe {
                    report.obstacle_violations.push(Violation { k, a: da.id, b: o.id(), distance: d });
                }
            }
        }
    }
    report
}

/// Linear-interpolation quantile of unsorted data; `None` when empty.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// The 50/90/99 % quantiles and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Self {
            p50: quantile(values, 0.5)?,
            p90: quantile(values, 0.9)?,
            p99: quantile(values, 0.99)?,
            max: quantile(values, 1.0)?,
        })
    }
}
