//! Noisy range measurements and the distance-gated neighbour sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DroneState, Obstacle, TargetState};
use crate::noise::NoiseStream;

/// Range sensor / radio settings of one drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Range noise variance `q`, m².
    pub q: f64,
    /// Range samples per sampling period.
    pub f: usize,
    /// Communication radius, m.
    pub r1: f64,
    /// Measurement radius, m.
    pub r2: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            q: 0.005,
            f: 100,
            r1: 10.0,
            r2: 5.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(Error::Config(format!("range noise variance must be positive, got {}", self.q)));
        }
        if self.f == 0 {
            return Err(Error::Config("at least one range sample per period is required".into()));
        }
        if !(self.r2 > 0.0 && self.r2.is_finite()) {
            return Err(Error::Config(format!("measurement radius must be positive, got {}", self.r2)));
        }
        if !(self.r1 >= 2.0 * self.r2) {
            return Err(Error::Config(format!(
                "communication radius {} must be at least twice the measurement radius {}",
                self.r1, self.r2
            )));
        }
        Ok(())
    }
}

/// The `f` range samples one drone takes of one target within a period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeBatch {
    pub drone_id: usize,
    pub target_id: usize,
    pub step: usize,
    pub samples: Vec<f64>,
}

impl RangeBatch {
    /// The sample used as the instantaneous range.
    pub fn first(&self) -> f64 {
        self.samples[0]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Empirical second moment `(1/f)·Σ d²`.
    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|d| d * d).sum::<f64>() / self.samples.len() as f64
    }
}

/// True ground-plane distance `‖F·x − s‖`.
pub fn ground_distance(drone: &DroneState, target: &TargetState) -> f64 {
    (drone.ground() - target.position).norm()
}

/// Draw `f` noisy ranges from `drone` to `target`.
///
/// Samples are `‖F·x − s‖ + ε`, `ε ~ N(0, q)`, kept exactly as drawn (they can
/// be negative for tiny distances).
pub fn measure_batch(
    drone: &DroneState,
    target: &TargetState,
    cfg: &SensorConfig,
    step: usize,
    noise: &mut NoiseStream,
) -> Result<RangeBatch> {
    let distance = ground_distance(drone, target);
    if distance > cfg.r2 {
        return Err(Error::OutOfRange {
            drone: drone.id,
            target: target.id,
            distance,
            radius: cfg.r2,
        });
    }
    let samples = (0..cfg.f.max(1))
        .map(|_| distance + noise.gaussian(cfg.q))
        .collect();
    Ok(RangeBatch {
        drone_id: drone.id,
        target_id: target.id,
        step,
        samples,
    })
}

/// Ids of the targets within measurement range of `drone` (boundary inclusive).
pub fn visible_targets(drone: &DroneState, targets: &[TargetState], cfg: &SensorConfig) -> Vec<usize> {
    targets
        .iter()
        .filter(|t| ground_distance(drone, t) <= cfg.r2)
        .map(|t| t.id)
        .collect()
}

/// Ids of the other drones within communication range of `drone`.
pub fn neighbor_set(drone: &DroneState, drones: &[DroneState], cfg: &SensorConfig) -> Vec<usize> {
    drones
        .iter()
        .filter(|g| g.id != drone.id && (g.position - drone.position).norm() <= cfg.r1)
        .map(|g| g.id)
        .collect()
}

/// Obstacles the drone detects; positions are disclosed exactly within `r2`.
pub fn visible_obstacles<'a>(
    drone: &DroneState,
    obstacles: &'a [Obstacle],
    cfg: &SensorConfig,
) -> Vec<&'a Obstacle> {
    obstacles
        .iter()
        .filter(|o| (o.position() - drone.position).norm() <= cfg.r2)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Vector2, Vector3};

    fn drone(id: usize, x: f64, y: f64) -> DroneState {
        DroneState::at_rest(id, Vector3::new(x, y, 2.0))
    }

    fn target(id: usize, x: f64, y: f64) -> TargetState {
        TargetState::new(id, Vector2::new(x, y), Vector2::zeros())
    }

    #[test]
    fn zero_noise_returns_true_distance() {
        let cfg = SensorConfig { q: 0.0, f: 5, ..Default::default() };
        let mut noise = NoiseStream::from_seed(3);
        let b = measure_batch(&drone(0, 0.0, 0.0), &target(0, 3.0, 4.0), &cfg, 0, &mut noise).unwrap();
        assert_eq!(b.samples, vec![5.0; 5]);
    }

    #[test]
    fn out_of_range_yields_no_batch() {
        let cfg = SensorConfig::default();
        let mut noise = NoiseStream::from_seed(3);
        let err = measure_batch(&drone(2, 0.0, 0.0), &target(1, 10.0, 0.0), &cfg, 0, &mut noise).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { drone: 2, target: 1, .. }));
    }

    #[test]
    fn sample_variance_matches_configuration() {
        let cfg = SensorConfig { q: 0.005, f: 100_000, ..Default::default() };
        let mut noise = NoiseStream::from_seed(11);
        let b = measure_batch(&drone(0, 0.0, 0.0), &target(0, 1.0, 1.0), &cfg, 0, &mut noise).unwrap();
        let mean = b.mean();
        let var = b.samples.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (b.samples.len() - 1) as f64;
        assert!((var / cfg.q - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn visibility_is_boundary_inclusive() {
        let cfg = SensorConfig::default();
        let d = drone(0, 0.0, 0.0);
        let targets = [target(0, 10.0, 0.0), target(1, 3.0, 4.0)];
        assert_eq!(visible_targets(&d, &targets, &cfg), vec![1]);
    }

    #[test]
    fn neighbour_sets() {
        let cfg = SensorConfig::default();
        let drones = [drone(0, 0.0, 0.0), drone(1, 0.5, 0.0), drone(2, 50.0, 0.0)];
        assert_eq!(neighbor_set(&drones[0], &drones, &cfg), vec![1]);
        assert_eq!(neighbor_set(&drones[1], &drones, &cfg), vec![0]);
        assert!(neighbor_set(&drones[2], &drones, &cfg).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(SensorConfig::default().validate().is_ok());
        assert!(SensorConfig { r1: 9.0, ..Default::default() }.validate().is_err());
        assert!(SensorConfig { q: 0.0, ..Default::default() }.validate().is_err());
        assert!(SensorConfig { f: 0, ..Default::default() }.validate().is_err());
    }
}
