//! The range-difference filter on its own: a pair of drones held exactly on
//! the preset shape around the true target, so only the filter is exercised.
//!
//! Prints the root-mean-square error for a few driving-noise levels.

use encircle::estimator::{build_measurement, dtse_update, init_estimator, EstimatorState};
use encircle::model::{step_target, DroneState, PresetShape, SystemMatrices, TargetState};
use encircle::noise::{NoiseStream, StreamKind};
use encircle::sensing::{measure_batch, SensorConfig};
use nalgebra::{Matrix2, Matrix4, Vector2, Vector3};

/// Post-transient RMS of `‖η̂ − η‖` over `steps` periods.
fn tracking_rms(q_scale: f64, steps: usize, seed: u64) -> encircle::Result<f64> {
    let mats = SystemMatrices::new(0.8)?;
    let shape = PresetShape::new(0.5, 24)?;
    let sensor = SensorConfig::default();
    let q = Matrix2::identity() * q_scale;
    let chol = q.cholesky().expect("positive definite").l();

    let mut target = TargetState::new(0, Vector2::new(0.5, 2.0), Vector2::zeros());
    let mut est: Option<EstimatorState> = None;
    let (mut sum, mut n) = (0.0, 0);
    for k in 0..steps {
        let p = shape.offset(k);
        let ground = |sign: f64| Vector3::new(target.position.x + sign * p.x, target.position.y + sign * p.y, 2.0);
        let xi = DroneState::at_rest(0, ground(1.0));
        let xg = DroneState::at_rest(1, ground(-1.0));
        let mut ni = NoiseStream::substream(seed, StreamKind::Range, 0, 0, k as u64);
        let mut ng = NoiseStream::substream(seed, StreamKind::Range, 1, 0, k as u64);
        let bi = measure_batch(&xi, &target, &sensor, k, &mut ni)?;
        let bg = measure_batch(&xg, &target, &sensor, k, &mut ng)?;

        let next = match &est {
            None => init_estimator(&bi, &xi.position, &bg, &xg.position, &Matrix4::identity())?,
            Some(e) => {
                let m = build_measurement(&bi, sensor.q, &xi.position, &bg, sensor.q, &xg.position)?;
                dtse_update(e, &m, &q, &mats)?
            }
        };
        if k >= 50 {
            sum += (next.eta_hat - target.eta()).norm_squared();
            n += 1;
        }
        est = Some(next);

        let mut w = NoiseStream::substream(seed, StreamKind::Process, 0, 0, k as u64);
        let omega = chol * Vector2::new(w.standard_normal(), w.standard_normal());
        target = step_target(&target, &omega, &mats)?;
    }
    Ok((sum / n as f64).sqrt())
}

pub fn run_example() -> encircle::Result<()> {
    for q in [0.05, 0.005, 0.0005] {
        println!("Q = {q:<6} I: RMS ‖e‖ = {:.3} m", tracking_rms(q, 400, 1)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> encircle::Result<()> {
    run_example()
}
