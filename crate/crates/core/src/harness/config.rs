//! Scenario description, loaded from JSON or TOML.

use std::path::Path;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::assignment::AssignmentConfig;
use crate::controller::ControllerParams;
use crate::error::{Error, Result};
use crate::model::{DroneState, Obstacle, PresetShape, SystemMatrices, TargetState};
use crate::sensing::SensorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneInit {
    pub position: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetInit {
    pub position: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    /// Per-target driving-noise covariance; the scenario default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process_noise: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleInit {
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    /// Draw range noise and target driving noise.
    pub noise: bool,
    /// Drop interaction and repulsion.
    pub attractive_only: bool,
    /// Controller reads the true target state instead of the filter.
    pub perfect_estimate: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            noise: true,
            attractive_only: false,
            perfect_estimate: false,
        }
    }
}

fn default_t() -> f64 {
    0.8
}
fn default_steps() -> usize {
    400
}
fn default_transient() -> usize {
    50
}
fn default_window() -> usize {
    30
}
fn default_q() -> [[f64; 2]; 2] {
    [[0.05, 0.0], [0.0, 0.05]]
}
fn default_shape() -> PresetShape {
    PresetShape { rho: 0.5, ell: 24 }
}
fn default_zeta0() -> [[f64; 4]; 4] {
    [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
}
fn default_threshold() -> f64 {
    0.4
}

/// Everything a run depends on besides the build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    /// Sampling period, s.
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// First step counted in statistics.
    #[serde(default = "default_transient")]
    pub transient: usize,
    /// Gramian window length `m1`.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Threshold on `‖e‖` used for occupancy statistics, m.
    #[serde(default = "default_threshold")]
    pub error_threshold: f64,
    pub drones: Vec<DroneInit>,
    pub targets: Vec<TargetInit>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleInit>,
    /// Default driving-noise covariance `Q`.
    #[serde(default = "default_q")]
    pub process_noise: [[f64; 2]; 2],
    /// Initial error covariance of every filter.
    #[serde(default = "default_zeta0")]
    pub initial_covariance: [[f64; 4]; 4],
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub controller: ControllerParams,
    #[serde(default = "default_shape")]
    pub shape: PresetShape,
    #[serde(default)]
    pub assignment: AssignmentConfig,
    #[serde(default)]
    pub flags: Flags,
    /// Optional replayed driving noise, `[step][target] = ω`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scripted_omega: Option<Vec<Vec<[f64; 2]>>>,
}

fn matrix2(m: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

fn is_spd2(m: &Matrix2<f64>) -> bool {
    (m - m.transpose()).abs().max() <= 1e-12 && m.cholesky().is_some()
}

impl ScenarioConfig {
    /// The six-drone, three-target reference scenario with two obstacles.
    pub fn golden() -> Self {
        let drone = |x: f64| DroneInit {
            position: [x, 2.0, 2.0],
            velocity: [0.0; 3],
        };
        let target = |x: f64, y: f64| TargetInit {
            position: [x, y],
            velocity: [0.0; 2],
            process_noise: None,
        };
        Self {
            name: "golden".into(),
            t: default_t(),
            steps: default_steps(),
            seed: 1,
            transient: default_transient(),
            window: default_window(),
            error_threshold: default_threshold(),
            drones: [1.5, 2.0, 2.5, 3.0, 3.5, 4.0].into_iter().map(drone).collect(),
            targets: vec![target(-2.0, 2.5), target(2.0, 1.0), target(3.0, 2.5)],
            obstacles: GOLDEN_OBSTACLES
                .iter()
                .map(|&position| ObstacleInit { position })
                .collect(),
            process_noise: default_q(),
            initial_covariance: default_zeta0(),
            sensor: SensorConfig::default(),
            controller: ControllerParams::default(),
            shape: default_shape(),
            assignment: AssignmentConfig::default(),
            flags: Flags::default(),
            scripted_omega: None,
        }
    }

    /// Golden geometry with noise off, the true state fed to the controller
    /// and only the attractive force.
    pub fn deadbeat() -> Self {
        let mut cfg = Self::golden();
        cfg.name = "deadbeat".into();
        cfg.obstacles.clear();
        cfg.flags = Flags {
            noise: false,
            attractive_only: true,
            perfect_estimate: true,
        };
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load by extension (`.json` / `.toml`); other names try JSON, then TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text).or_else(|_| Self::from_toml(&text)),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        SystemMatrices::new(self.t)?;
        if self.steps == 0 {
            return Err(Error::Config("at least one step is required".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("scenario has no targets".into()));
        }
        if self.drones.len() != 2 * self.targets.len() {
            return Err(Error::Config(format!(
                "{} drones for {} targets; exactly two drones per target are required",
                self.drones.len(),
                self.targets.len()
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        for (i, d) in self.drones.iter().enumerate() {
            if !finite(&d.position) || !finite(&d.velocity) {
                return Err(Error::Config(format!("drone {i} has a non-finite initial state")));
            }
        }
        for (j, s) in self.targets.iter().enumerate() {
            if !finite(&s.position) || !finite(&s.velocity) {
                return Err(Error::Config(format!("target {j} has a non-finite initial state")));
            }
            if let Some(q) = &s.process_noise {
                if !is_spd2(&matrix2(q)) {
                    return Err(Error::Config(format!("target {j} process noise must be symmetric positive definite")));
                }
            }
        }
        for (o, ob) in self.obstacles.iter().enumerate() {
            if !finite(&ob.position) {
                return Err(Error::Config(format!("obstacle {o} has a non-finite position")));
            }
        }
        if !is_spd2(&matrix2(&self.process_noise)) {
            return Err(Error::Config("process noise must be symmetric positive definite".into()));
        }
        let z0 = self.zeta0();
        if (z0 - z0.transpose()).abs().max() > 1e-12 || z0.cholesky().is_none() {
            return Err(Error::Config("initial covariance must be symmetric positive definite".into()));
        }
        if self.window + 1 < 4 {
            return Err(Error::Config(format!("Gramian window {} is shorter than 3", self.window)));
        }
        if !(self.error_threshold > 0.0) {
            return Err(Error::Config("error threshold must be positive".into()));
        }
        if let Some(script) = &self.scripted_omega {
            if script.len() < self.steps {
                return Err(Error::Config(format!(
                    "scripted driving noise covers {} of {} steps",
                    script.len(),
                    self.steps
                )));
            }
            if let Some(k) = script.iter().position(|row| row.len() != self.targets.len()) {
                return Err(Error::Config(format!("scripted driving noise row {k} has the wrong target count")));
            }
        }
        self.sensor.validate()?;
        self.controller.validate()?;
        self.shape.validate()?;
        self.assignment.validate()?;
        Ok(())
    }

    pub fn mats(&self) -> Result<SystemMatrices> {
        SystemMatrices::new(self.t)
    }

    pub fn zeta0(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|r, c| self.initial_covariance[r][c])
    }

    /// Driving-noise covariance of target `j`.
    pub fn target_noise(&self, j: usize) -> Matrix2<f64> {
        matrix2(self.targets[j].process_noise.as_ref().unwrap_or(&self.process_noise))
    }

    pub fn initial_drones(&self) -> Vec<DroneState> {
        self.drones
            .iter()
            .enumerate()
            .map(|(i, d)| DroneState::new(i, Vector3::from(d.position), Vector3::from(d.velocity)))
            .collect()
    }

    pub fn initial_targets(&self) -> Vec<TargetState> {
        self.targets
            .iter()
            .enumerate()
            .map(|(j, s)| TargetState::new(j, Vector2::from(s.position), Vector2::from(s.velocity)))
            .collect()
    }

    pub fn obstacle_list(&self) -> Vec<Obstacle> {
        self.obstacles
            .iter()
            .enumerate()
            .map(|(o, ob)| Obstacle::new(o, Vector3::from(ob.position)))
            .collect()
    }
}

/// Obstacles of the golden scenario, placed on the drones' approach paths.
pub const GOLDEN_OBSTACLES: [[f64; 3]; 2] = [[1.5, 2.0, 2.25], [4.0, 2.0, 2.25]];
