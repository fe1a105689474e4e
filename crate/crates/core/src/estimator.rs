//! Range-difference target state estimator.
//!
//! Two drones `i` and `g` watching the same target turn their squared ranges
//! into one scalar linear measurement of the target position,
//!
//! ```text
//! θ = d_i² − d_g² − ‖F·x_i‖² + ‖F·x_g‖² = C·η + ε̄,   C = [−2·(F·(x_i − x_g))ᵀ, 0, 0]
//! ```
//!
//! whose noise `ε̄` has mean `q_i − q_g` and a variance estimated from the
//! per-period range batches. A Kalman recursion on the target model then
//! tracks position and velocity.

use nalgebra::{Matrix2, Matrix4, RowVector4, SymmetricEigen, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemMatrices;
use crate::sensing::RangeBatch;

/// Estimate, covariance and gain of one target filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    pub eta_hat: Vector4<f64>,
    pub zeta: Matrix4<f64>,
    pub zeta_pred: Matrix4<f64>,
    pub gain: Vector4<f64>,
}

impl EstimatorState {
    /// Smallest eigenvalue of the error covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.zeta).eigenvalues.min()
    }

    /// Ratio of the extreme eigenvalues of the error covariance.
    pub fn condition_number(&self) -> f64 {
        let ev = SymmetricEigen::new(self.zeta).eigenvalues;
        ev.max() / ev.min()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }
}

/// Scalar range-difference measurement of one target by a drone pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub theta: f64,
    pub c: RowVector4<f64>,
    /// Expected measurement noise `q_i − q_g`.
    pub mean_offset: f64,
    pub var_hat: f64,
    /// Whether either `mean(d²) − q` term was clamped at zero.
    pub clamped: bool,
    /// Both drones share a ground position; `C` is zero.
    pub degenerate: bool,
}

/// Plane distance below which the drone pair counts as co-located.
pub const DEGENERATE_BASELINE: f64 = 1e-12;

/// Estimated variance of the range-difference noise from two range batches.
///
/// Returns the estimate and whether a negative `mean(d²) − q` was clamped.
pub fn output_noise_variance(batch_i: &RangeBatch, q_i: f64, batch_g: &RangeBatch, q_g: f64) -> (f64, bool) {
    let excess_i = batch_i.mean_square() - q_i;
    let excess_g = batch_g.mean_square() - q_g;
    let clamped = excess_i < 0.0 || excess_g < 0.0;
    let var = 2.0 * q_i * q_i
        + 2.0 * q_g * q_g
        + 4.0 * excess_i.max(0.0) * q_i
        + 4.0 * excess_g.max(0.0) * q_g;
    (var, clamped)
}

/// Build the pair measurement from the two drones' batches.
///
/// `θ` uses the first sample of each batch; the whole batch only feeds the
/// variance estimate.
pub fn build_measurement(
    batch_i: &RangeBatch,
    q_i: f64,
    x_i: &Vector3<f64>,
    batch_g: &RangeBatch,
    q_g: f64,
    x_g: &Vector3<f64>,
) -> Result<MeasurementRecord> {
    if batch_i.target_id != batch_g.target_id || batch_i.step != batch_g.step {
        return Err(Error::ModelInput(format!(
            "batches disagree: target {} step {} vs target {} step {}",
            batch_i.target_id, batch_i.step, batch_g.target_id, batch_g.step
        )));
    }
    if batch_i.drone_id == batch_g.drone_id {
        return Err(Error::ModelInput(format!(
            "measurement pair needs two drones, got {} twice",
            batch_i.drone_id
        )));
    }
    if batch_i.samples.is_empty() || batch_g.samples.is_empty() {
        return Err(Error::ModelInput("empty range batch".into()));
    }
    let gi = x_i.xy();
    let gg = x_g.xy();
    let d_i = batch_i.first();
    let d_g = batch_g.first();
    let theta = d_i * d_i - d_g * d_g - gi.norm_squared() + gg.norm_squared();
    let baseline = gi - gg;
    let degenerate = baseline.norm() <= DEGENERATE_BASELINE;
    let c = if degenerate {
        RowVector4::zeros()
    } else {
        RowVector4::new(-2.0 * baseline.x, -2.0 * baseline.y, 0.0, 0.0)
    };
    let (var_hat, clamped) = output_noise_variance(batch_i, q_i, batch_g, q_g);
    Ok(MeasurementRecord {
        theta,
        c,
        mean_offset: q_i - q_g,
        var_hat,
        clamped,
        degenerate,
    })
}

/// One predict + correct cycle of the filter.
pub fn dtse_update(
    est: &EstimatorState,
    meas: &MeasurementRecord,
    process_noise: &Matrix2<f64>,
    mats: &SystemMatrices,
) -> Result<EstimatorState> {
    if !(meas.var_hat > 0.0) {
        return Err(Error::Numerical(format!(
            "output noise variance must be positive, got {}",
            meas.var_hat
        )));
    }
    let a2 = mats.a2();
    let b2 = mats.b2();
    let zeta_pred = a2 * est.zeta * a2.transpose() + b2 * process_noise * b2.transpose();
    let pred = a2 * est.eta_hat;
    let c = &meas.c;
    let innovation_var = (c * zeta_pred * c.transpose())[(0, 0)] + meas.var_hat;
    if !(innovation_var > 0.0) || !innovation_var.is_finite() {
        return Err(Error::Numerical(format!("innovation variance {innovation_var} is not positive")));
    }
    let gain: Vector4<f64> = zeta_pred * c.transpose() / innovation_var;
    let theta_hat = (c * pred)[(0, 0)] + meas.mean_offset;
    let eta_hat = pred + gain * (meas.theta - theta_hat);
    let zeta = (Matrix4::identity() - gain * c) * zeta_pred;
    let zeta = (zeta + zeta.transpose()) * 0.5;
    let next = EstimatorState {
        eta_hat,
        zeta,
        zeta_pred,
        gain,
    };
    if !next.eta_hat.iter().chain(next.gain.iter()).all(|v| v.is_finite()) {
        return Err(Error::Numerical("estimate or gain is not finite".into()));
    }
    if !next.is_positive_definite() {
        return Err(Error::Numerical(format!(
            "error covariance lost positive definiteness (min eigenvalue {})",
            next.min_eigenvalue()
        )));
    }
    Ok(next)
}

/// Pure prediction, used when the pair has no measurement this period.
pub fn predict_only(est: &EstimatorState, process_noise: &Matrix2<f64>, mats: &SystemMatrices) -> EstimatorState {
    let a2 = mats.a2();
    let b2 = mats.b2();
    let zeta_pred = a2 * est.zeta * a2.transpose() + b2 * process_noise * b2.transpose();
    EstimatorState {
        eta_hat: a2 * est.eta_hat,
        zeta: zeta_pred,
        zeta_pred,
        gain: Vector4::zeros(),
    }
}

/// Estimated target position and velocity.
pub fn extract_state(est: &EstimatorState) -> (Vector2<f64>, Vector2<f64>) {
    (
        Vector2::new(est.eta_hat[0], est.eta_hat[1]),
        Vector2::new(est.eta_hat[2], est.eta_hat[3]),
    )
}

/// Intersection of the circles `‖p − c_i‖ = r_i`, `‖p − c_g‖ = r_g`.
///
/// Of two intersection points the one to the left of `c_i → c_g` is
/// returned (both are equidistant from the midpoint). When the circles do not
/// meet, the least-squares point `argmin (‖p − c_i‖ − r_i)² + (‖p − c_g‖ − r_g)²`
/// on the line of centres is returned; for equal radii that is the midpoint.
pub fn circle_intersection(c_i: &Vector2<f64>, r_i: f64, c_g: &Vector2<f64>, r_g: f64) -> Vector2<f64> {
    let midpoint = (c_i + c_g) * 0.5;
    let delta = c_g - c_i;
    let dist = delta.norm();
    if dist <= DEGENERATE_BASELINE {
        return midpoint;
    }
    let unit = delta / dist;
    let (r_i, r_g) = (r_i.max(0.0), r_g.max(0.0));
    if dist >= r_i + r_g {
        return c_i + unit * ((dist + r_i - r_g) / 2.0);
    }
    if r_g >= r_i + dist {
        return c_i + unit * ((dist - r_i - r_g) / 2.0);
    }
    if r_i >= r_g + dist {
        return c_i + unit * ((dist + r_i + r_g) / 2.0);
    }
    let along = (dist * dist + r_i * r_i - r_g * r_g) / (2.0 * dist);
    let h = (r_i * r_i - along * along).max(0.0).sqrt();
    let left = Vector2::new(-unit.y, unit.x);
    c_i + unit * along + left * h
}

/// Initial filter state from the first pair of batches.
pub fn init_estimator(
    batch_i: &RangeBatch,
    x_i: &Vector3<f64>,
    batch_g: &RangeBatch,
    x_g: &Vector3<f64>,
    zeta0: &Matrix4<f64>,
) -> Result<EstimatorState> {
    let symmetric = (zeta0 - zeta0.transpose()).abs().max() <= 1e-12 * zeta0.abs().max().max(1.0);
    if !symmetric || zeta0.cholesky().is_none() {
        return Err(Error::Config("initial error covariance must be symmetric positive definite".into()));
    }
    let s0 = circle_intersection(&x_i.xy(), batch_i.mean(), &x_g.xy(), batch_g.mean());
    Ok(EstimatorState {
        eta_hat: Vector4::new(s0.x, s0.y, 0.0, 0.0),
        zeta: *zeta0,
        zeta_pred: *zeta0,
        gain: Vector4::zeros(),
    })
}

/// Per-step estimator log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorLog {
    pub k: usize,
    pub target_id: usize,
    pub eta_hat: Vector4<f64>,
    pub trace_zeta: f64,
    pub min_eig_zeta: f64,
    pub var_hat: Option<f64>,
    pub clamped: bool,
    pub measured: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn batch(drone: usize, samples: Vec<f64>) -> RangeBatch {
        RangeBatch {
            drone_id: drone,
            target_id: 0,
            step: 0,
            samples,
        }
    }

    fn mats() -> SystemMatrices {
        SystemMatrices::new(0.8).unwrap()
    }

    #[test]
    fn symmetric_pair_measures_zero() {
        let xi = Vector3::new(1.0, 0.0, 2.0);
        let xg = Vector3::new(-1.0, 0.0, 2.0);
        let m = build_measurement(&batch(0, vec![1.0]), 0.005, &xi, &batch(1, vec![1.0]), 0.005, &xg).unwrap();
        assert_eq!(m.theta, 0.0);
        assert_eq!(m.c, RowVector4::new(-4.0, 0.0, 0.0, 0.0));
        assert_eq!((m.c * Vector4::zeros())[(0, 0)], 0.0);
    }

    #[test]
    fn noise_free_measurement_is_linear_in_position() {
        let xi = Vector3::new(1.5, 2.0, 2.0);
        let xg = Vector3::new(-0.5, 1.0, 2.0);
        let s = Vector2::new(0.3, -0.7);
        let di = (xi.xy() - s).norm();
        let dg = (xg.xy() - s).norm();
        let m = build_measurement(&batch(0, vec![di]), 0.005, &xi, &batch(1, vec![dg]), 0.005, &xg).unwrap();
        let eta = Vector4::new(s.x, s.y, 9.0, -9.0);
        assert_relative_eq!(m.theta, (m.c * eta)[(0, 0)], epsilon = 1e-12);
    }

    #[test]
    fn variance_limit_for_equal_unit_ranges() {
        // f → ∞ limit: mean(d²) = d² + q.
        let q: f64 = 0.005;
        let b = batch(0, vec![(1.0 + q).sqrt()]);
        let (v, clamped) = output_noise_variance(&b, q, &b, q);
        assert!(!clamped);
        assert_relative_eq!(v, 0.0401, epsilon = 1e-12);
    }

    #[test]
    fn negative_excess_is_clamped() {
        let b = batch(0, vec![0.01, -0.02]);
        let (v, clamped) = output_noise_variance(&b, 0.005, &b, 0.005);
        assert!(clamped);
        assert_relative_eq!(v, 4.0 * 0.005 * 0.005, epsilon = 1e-15);
    }

    #[test]
    fn co_located_pair_is_degenerate() {
        let x = Vector3::new(1.0, 1.0, 2.0);
        let x2 = Vector3::new(1.0, 1.0, 3.0);
        let m = build_measurement(&batch(0, vec![1.0]), 0.005, &x, &batch(1, vec![1.0]), 0.005, &x2).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.c, RowVector4::zeros());
    }

    #[test]
    fn mismatched_batches_are_rejected() {
        let x = Vector3::zeros();
        let mut other = batch(1, vec![1.0]);
        other.target_id = 3;
        assert!(build_measurement(&batch(0, vec![1.0]), 0.005, &x, &other, 0.005, &x).is_err());
        assert!(build_measurement(&batch(0, vec![1.0]), 0.005, &x, &batch(0, vec![1.0]), 0.005, &x).is_err());
    }

    #[test]
    fn zero_row_gives_pure_prediction() {
        let est = EstimatorState {
            eta_hat: Vector4::new(1.0, 2.0, 0.5, -0.5),
            zeta: Matrix4::identity(),
            zeta_pred: Matrix4::identity(),
            gain: Vector4::zeros(),
        };
        let meas = MeasurementRecord {
            theta: 3.0,
            c: RowVector4::zeros(),
            mean_offset: 0.0,
            var_hat: 0.04,
            clamped: false,
            degenerate: true,
        };
        let q = Matrix2::identity() * 0.05;
        let m = mats();
        let next = dtse_update(&est, &meas, &q, &m).unwrap();
        let pred = predict_only(&est, &q, &m);
        assert_relative_eq!(next.eta_hat, m.a2() * est.eta_hat, epsilon = 1e-15);
        assert_relative_eq!(next.zeta, pred.zeta, epsilon = 1e-15);
        assert_eq!(next.gain, Vector4::zeros());
    }

    #[test]
    fn non_positive_variance_is_a_numerical_error() {
        let est = EstimatorState {
            eta_hat: Vector4::zeros(),
            zeta: Matrix4::identity(),
            zeta_pred: Matrix4::identity(),
            gain: Vector4::zeros(),
        };
        let meas = MeasurementRecord {
            theta: 0.0,
            c: RowVector4::new(1.0, 0.0, 0.0, 0.0),
            mean_offset: 0.0,
            var_hat: 0.0,
            clamped: false,
            degenerate: false,
        };
        assert!(matches!(
            dtse_update(&est, &meas, &Matrix2::identity(), &mats()),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn extract_uses_selectors() {
        let est = EstimatorState {
            eta_hat: Vector4::new(1.0, 2.0, 3.0, 4.0),
            zeta: Matrix4::identity(),
            zeta_pred: Matrix4::identity(),
            gain: Vector4::zeros(),
        };
        assert_eq!(extract_state(&est), (Vector2::new(1.0, 2.0), Vector2::new(3.0, 4.0)));
    }

    #[test]
    fn initial_position_from_ranges() {
        let xi = Vector3::new(1.0, 0.0, 2.0);
        let xg = Vector3::new(-1.0, 0.0, 2.0);
        let z0 = Matrix4::identity();
        let est = init_estimator(&batch(0, vec![1.0]), &xi, &batch(1, vec![1.0]), &xg, &z0).unwrap();
        assert_relative_eq!(est.eta_hat, Vector4::zeros(), epsilon = 1e-12);
        let far = init_estimator(&batch(0, vec![0.1]), &xi, &batch(1, vec![0.1]), &xg, &z0).unwrap();
        assert_eq!(far.eta_hat, Vector4::zeros());
    }

    #[test]
    fn initial_covariance_must_be_pd() {
        let x = Vector3::zeros();
        let mut bad = Matrix4::identity();
        bad[(3, 3)] = -1.0;
        assert!(matches!(
            init_estimator(&batch(0, vec![1.0]), &x, &batch(1, vec![1.0]), &x, &bad),
            Err(Error::Config(_))
        ));
    }
}
