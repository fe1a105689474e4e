//! Pseudo-force encirclement controller.
//!
//! Each tasking drone sums three virtual accelerations: attraction towards its
//! slot on the rotating shape around the estimated target, a log-barrier push
//! away from nearby drones, and a log-barrier push away from obstacles and
//! other targets. The two barrier terms are capped when they line up with the
//! attraction, then the command adds velocity damping `−(2/t)·v`.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemMatrices;

/// Smallest admitted magnitude of a barrier denominator.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    /// Interaction coefficient `γ₁`.
    pub gamma1: f64,
    /// Repulsion coefficient `γ₂`.
    pub gamma2: f64,
    /// Physical drone radius `ã`, m.
    pub drone_radius: f64,
    /// Safety radius `r̃ = ã + b̃`, m.
    pub r_safe: f64,
    /// Action-radius margin `Δr`, m.
    pub delta_r: f64,
    /// Cap `ε` on aligned barrier forces, m/s².
    pub cap: f64,
    /// Actuator saturation, m/s².
    pub u_max: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            gamma1: 0.05,
            gamma2: 0.005,
            drone_radius: 0.1,
            r_safe: 0.2,
            delta_r: 0.1,
            cap: 1.0,
            u_max: 50.0,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("drone_radius", self.drone_radius),
            ("r_safe", self.r_safe),
            ("delta_r", self.delta_r),
            ("cap", self.cap),
            ("u_max", self.u_max),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("controller {name} must be positive, got {v}")));
            }
        }
        if self.cap > self.u_max {
            return Err(Error::Config(format!("cap {} exceeds u_max {}", self.cap, self.u_max)));
        }
        if self.drone_radius >= self.r_safe {
            return Err(Error::Config(format!(
                "drone radius {} must be smaller than the safety radius {}",
                self.drone_radius, self.r_safe
            )));
        }
        Ok(())
    }

    /// Minimum separation `b̃ = r̃ − ã`.
    pub fn safe_margin(&self) -> f64 {
        self.r_safe - self.drone_radius
    }
}

/// Which side of the shape a drone holds: `+𝓟` (i-side) or `−𝓟` (g-side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    ISide,
    GSide,
}

impl Role {
    /// Lower drone id takes the i-side.
    pub fn for_pair(drone: usize, partner: usize) -> Self {
        if drone < partner {
            Role::ISide
        } else {
            Role::GSide
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Role::ISide => 1.0,
            Role::GSide => -1.0,
        }
    }
}

/// The three pseudo-forces of one drone, before and after the caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceBreakdown {
    pub at: Vector3<f64>,
    pub inter: Vector3<f64>,
    pub rep: Vector3<f64>,
    pub inter_capped: Vector3<f64>,
    pub rep_capped: Vector3<f64>,
    pub resultant: Vector3<f64>,
    pub inter_cap_fired: bool,
    pub rep_cap_fired: bool,
}

impl ForceBreakdown {
    /// Uncapped breakdown; call [`apply_caps`] to fill the capped fields.
    pub fn new(at: Vector3<f64>, inter: Vector3<f64>, rep: Vector3<f64>) -> Self {
        Self {
            at,
            inter,
            rep,
            inter_capped: inter,
            rep_capped: rep,
            resultant: at + inter + rep,
            inter_cap_fired: false,
            rep_cap_fired: false,
        }
    }

    /// No interaction or repulsion acted on the drone.
    pub fn is_force_free(&self) -> bool {
        self.inter == Vector3::zeros() && self.rep == Vector3::zeros()
    }
}

fn clamp_norm(v: Vector3<f64>, limit: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > limit {
        v * (limit / n)
    } else {
        v
    }
}

fn floored(denominator: f64) -> f64 {
    if denominator.abs() < DENOMINATOR_FLOOR {
        if denominator < 0.0 {
            -DENOMINATOR_FLOOR
        } else {
            DENOMINATOR_FLOOR
        }
    } else {
        denominator
    }
}

/// Attraction towards `ŝ ± 𝓟 + t·ν̂`; zero vertical component.
pub fn attractive_force(
    role: Role,
    x: &Vector3<f64>,
    s_hat: &Vector2<f64>,
    nu_hat: &Vector2<f64>,
    shape: &Vector2<f64>,
    mats: &SystemMatrices,
) -> Vector3<f64> {
    let t = mats.t();
    let p_hat = x.xy() - s_hat;
    let err = p_hat - shape * role.sign() - nu_hat * t;
    mats.lift(&(err * (-2.0 / (t * t))))
}

/// Velocity-inflated action radius `r̃ + Δr + ‖t·ν̂‖`.
pub fn action_radius(nu_hat: &Vector2<f64>, params: &ControllerParams, mats: &SystemMatrices) -> f64 {
    params.r_safe + params.delta_r + (nu_hat * mats.t()).norm()
}

/// Drone-drone barrier, active for `2r̃ ≤ d ≤ 2r̄`.
pub fn interaction_force(
    x: &Vector3<f64>,
    neighbors: &[Vector3<f64>],
    params: &ControllerParams,
    r_bar: f64,
) -> Vector3<f64> {
    let r = params.r_safe;
    let mut total = Vector3::zeros();
    for other in neighbors {
        let p = x - other;
        let d = p.norm();
        if d > 2.0 * r_bar || d < 2.0 * r {
            continue;
        }
        let denom = floored((2.0 * r - d) * d * d);
        total += p * (-2.0 * params.gamma1 * r / denom);
    }
    clamp_norm(total, params.u_max)
}

/// Obstacle / foreign-target barrier, active for `r̃ ≤ d̂ ≤ r̄`.
///
/// Obstacles act in 3-D; targets are ground points and act in the plane.
pub fn repulsive_force(
    x: &Vector3<f64>,
    obstacles: &[Vector3<f64>],
    targets: &[Vector2<f64>],
    params: &ControllerParams,
    r_bar: f64,
) -> Vector3<f64> {
    let r = params.r_safe;
    let term = |p: Vector3<f64>| {
        let d = p.norm();
        if d > r_bar || d < r {
            return Vector3::zeros();
        }
        let denom = floored((r - d) * d * d);
        p * (-params.gamma2 * r / denom)
    };
    let mut total = Vector3::zeros();
    for o in obstacles {
        total += term(x - o);
    }
    for s in targets {
        let p = x.xy() - s;
        total += term(Vector3::new(p.x, p.y, 0.0));
    }
    clamp_norm(total, params.u_max)
}

fn cap(v: &Vector3<f64>, eps: f64) -> Vector3<f64> {
    v * (eps / eps.max(v.norm()))
}

/// Cap each barrier force that points along the attraction and does not
/// oppose the other barrier force.
pub fn apply_caps(fb: &ForceBreakdown, params: &ControllerParams) -> ForceBreakdown {
    let (at, inter, rep) = (fb.at, fb.inter, fb.rep);
    let zero = Vector3::zeros();
    let inter_fires = inter != zero && inter.dot(&at) >= 0.0 && (rep == zero || rep.dot(&inter) >= 0.0);
    let rep_fires = rep != zero && rep.dot(&at) >= 0.0 && (inter == zero || inter.dot(&rep) >= 0.0);
    let inter_capped = if inter_fires { cap(&inter, params.cap) } else { inter };
    let rep_capped = if rep_fires { cap(&rep, params.cap) } else { rep };
    ForceBreakdown {
        at,
        inter,
        rep,
        inter_capped,
        rep_capped,
        resultant: at + inter_capped + rep_capped,
        inter_cap_fired: inter_fires,
        rep_cap_fired: rep_fires,
    }
}

/// `u = Γ − (2/t)·v`, saturated componentwise at `u_max`.
pub fn accel_command(
    fb: &ForceBreakdown,
    v: &Vector3<f64>,
    params: &ControllerParams,
    mats: &SystemMatrices,
) -> Vector3<f64> {
    let u = fb.resultant - v * (2.0 / mats.t());
    u.map(|c| c.clamp(-params.u_max, params.u_max))
}

/// First-order change of the drone's potential over one step, `−(Γ_at+Γ_in+Γ_re)ᵀ·Δx`.
///
/// The uncapped forces are the negative potential gradient; `Δx` is the
/// displacement actually commanded.
pub fn potential_change(fb: &ForceBreakdown, displacement: &Vector3<f64>) -> f64 {
    -(fb.at + fb.inter + fb.rep).dot(displacement)
}

/// Attractive, interaction and barrier potentials at one position.
///
/// Outside an annulus the matching barrier is zero; inside the inner radius
/// it is `+∞`.
pub fn potential(
    attractive_error: &Vector2<f64>,
    x: &Vector3<f64>,
    neighbors: &[Vector3<f64>],
    obstacles: &[Vector3<f64>],
    params: &ControllerParams,
    r_bar: f64,
    mats: &SystemMatrices,
) -> f64 {
    let t = mats.t();
    let r = params.r_safe;
    let mut v = attractive_error.norm_squared() / (t * t);
    for g in neighbors {
        let d = (x - g).norm();
        if d <= 2.0 * r_bar {
            v -= params.gamma1 * (1.0 - 2.0 * r / d).ln();
        }
    }
    for o in obstacles {
        let d = (x - o).norm();
        if d <= r_bar {
            v -= params.gamma2 * (1.0 - r / d).ln();
        }
    }
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Per-drone controller log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceLog {
    pub k: usize,
    pub drone_id: usize,
    pub forces: ForceBreakdown,
    pub u: Vector3<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mats() -> SystemMatrices {
        SystemMatrices::new(0.8).unwrap()
    }

    #[test]
    fn attraction_vanishes_on_the_slot() {
        let m = mats();
        let s = Vector2::new(1.0, -1.0);
        let nu = Vector2::new(0.2, 0.1);
        let shape = Vector2::new(0.0, 0.5);
        let slot = s + shape + nu * 0.8;
        let x = Vector3::new(slot.x, slot.y, 2.0);
        assert_relative_eq!(attractive_force(Role::ISide, &x, &s, &nu, &shape, &m), Vector3::zeros(), epsilon = 1e-12);
        let g_slot = s - shape + nu * 0.8;
        let xg = Vector3::new(g_slot.x, g_slot.y, 2.0);
        assert_relative_eq!(attractive_force(Role::GSide, &xg, &s, &nu, &shape, &m), Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn interaction_example() {
        let p = ControllerParams::default();
        let f = interaction_force(&Vector3::new(0.5, 0.0, 0.0), &[Vector3::zeros()], &p, 0.3);
        assert_relative_eq!(f, Vector3::new(0.4, 0.0, 0.0), epsilon = 1e-12);
        assert_eq!(interaction_force(&Vector3::new(0.61, 0.0, 0.0), &[Vector3::zeros()], &p, 0.3), Vector3::zeros());
        assert_eq!(interaction_force(&Vector3::new(0.39, 0.0, 0.0), &[Vector3::zeros()], &p, 0.3), Vector3::zeros());
    }

    #[test]
    fn repulsion_example() {
        let p = ControllerParams::default();
        let f = repulsive_force(&Vector3::new(0.3, 0.0, 0.0), &[Vector3::zeros()], &[], &p, 0.4);
        assert_relative_eq!(f, Vector3::new(1.0 / 30.0, 0.0, 0.0), epsilon = 1e-12);
        let planar = repulsive_force(&Vector3::new(0.3, 0.0, 2.0), &[], &[Vector2::zeros()], &p, 0.4);
        assert_relative_eq!(planar, Vector3::new(1.0 / 30.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn denominators_are_floored() {
        let p = ControllerParams::default();
        let f = interaction_force(&Vector3::new(0.4, 0.0, 0.0), &[Vector3::zeros()], &p, 0.3);
        assert!(f.iter().all(|c| c.is_finite()));
        assert_relative_eq!(f.norm(), p.u_max, epsilon = 1e-12);
    }

    #[test]
    fn action_radius_examples() {
        let p = ControllerParams::default();
        let m = mats();
        assert_relative_eq!(action_radius(&Vector2::zeros(), &p, &m), 0.3, epsilon = 1e-12);
        assert_relative_eq!(action_radius(&Vector2::new(1.0, 0.0), &p, &m), 1.1, epsilon = 1e-12);
    }

    #[test]
    fn cap_preserves_direction() {
        let p = ControllerParams { cap: 2.0, ..Default::default() };
        let fb = ForceBreakdown::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(6.0, 8.0, 0.0), Vector3::zeros());
        let out = apply_caps(&fb, &p);
        assert!(out.inter_cap_fired);
        assert_relative_eq!(out.inter_capped, Vector3::new(1.2, 1.6, 0.0), epsilon = 1e-12);
        assert_eq!(out.resultant, out.at + out.inter_capped + out.rep_capped);
    }

    #[test]
    fn small_forces_pass_unchanged() {
        let p = ControllerParams::default();
        let fb = ForceBreakdown::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.3, 0.0, 0.0), Vector3::zeros());
        assert_eq!(apply_caps(&fb, &p).inter_capped, fb.inter);
    }

    #[test]
    fn opposing_forces_are_not_capped() {
        let p = ControllerParams::default();
        let fb = ForceBreakdown::new(
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(-5.0, 1.0, 0.0),
            Vector3::new(-1.0, -6.0, 0.0),
        );
        let out = apply_caps(&fb, &p);
        assert!(!out.inter_cap_fired && !out.rep_cap_fired);
        assert_eq!(out.resultant, fb.at + fb.inter + fb.rep);
        let dx = out.resultant * (0.5 * 0.64);
        assert!(potential_change(&out, &dx) <= 0.0);
    }

    #[test]
    fn damping_holds_altitude() {
        let m = mats();
        let p = ControllerParams::default();
        let v = Vector3::new(0.0, 0.0, 0.3);
        let fb = ForceBreakdown::new(Vector3::zeros(), Vector3::zeros(), Vector3::zeros());
        let u = accel_command(&fb, &v, &p, &m);
        assert_relative_eq!(u.z, -2.0 * 0.3 / 0.8, epsilon = 1e-12);
        let next = crate::model::step_drone(&crate::model::DroneState::new(0, Vector3::new(0.0, 0.0, 2.0), v), &u, &m).unwrap();
        assert_relative_eq!(next.velocity.z, -0.3, epsilon = 1e-12);
        assert_relative_eq!(next.position.z, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_input_zero_command() {
        let fb = ForceBreakdown::new(Vector3::zeros(), Vector3::zeros(), Vector3::zeros());
        assert_eq!(accel_command(&fb, &Vector3::zeros(), &ControllerParams::default(), &mats()), Vector3::zeros());
    }

    #[test]
    fn command_is_saturated() {
        let fb = ForceBreakdown::new(Vector3::new(400.0, -400.0, 0.0), Vector3::zeros(), Vector3::zeros());
        let u = accel_command(&fb, &Vector3::zeros(), &ControllerParams::default(), &mats());
        assert_eq!(u, Vector3::new(50.0, -50.0, 0.0));
    }

    #[test]
    fn params_validation() {
        assert!(ControllerParams::default().validate().is_ok());
        assert!(ControllerParams { cap: 60.0, ..Default::default() }.validate().is_err());
        assert!(ControllerParams { gamma1: 0.0, ..Default::default() }.validate().is_err());
        assert!(ControllerParams { drone_radius: 0.3, ..Default::default() }.validate().is_err());
    }
}
