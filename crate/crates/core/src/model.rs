//! State types and discrete double-integrator dynamics.
//!
//! Drones live in 3-D and follow `x⁺ = x + t·v + ½t²·u`, `v⁺ = v + t·u`.
//! Ground targets follow the planar analogue driven by a random acceleration.

use nalgebra::{Matrix2x3, Matrix4, Matrix4x2, SMatrix, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type Matrix6x3 = SMatrix<f64, 6, 3>;

/// Position / velocity of one tasking drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub id: usize,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl DroneState {
    pub fn new(id: usize, position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self {
            id,
            position,
            velocity,
        }
    }

    pub fn at_rest(id: usize, position: Vector3<f64>) -> Self {
        Self::new(id, position, Vector3::zeros())
    }

    /// Ground-plane projection `F·x`.
    pub fn ground(&self) -> Vector2<f64> {
        self.position.xy()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|c| c.is_finite())
    }
}

/// Hidden ground-truth state of a ground target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub id: usize,
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
}

impl TargetState {
    pub fn new(id: usize, position: Vector2<f64>, velocity: Vector2<f64>) -> Self {
        Self {
            id,
            position,
            velocity,
        }
    }

    /// Stacked state `[s, ν]`.
    pub fn eta(&self) -> Vector4<f64> {
        Vector4::new(
            self.position.x,
            self.position.y,
            self.velocity.x,
            self.velocity.y,
        )
    }

    pub fn from_eta(id: usize, eta: &Vector4<f64>) -> Self {
        Self::new(id, eta.fixed_rows::<2>(0).into(), eta.fixed_rows::<2>(2).into())
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|c| c.is_finite())
    }
}

/// A static obstacle. The position is fixed once constructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    id: usize,
    position: Vector3<f64>,
}

impl Obstacle {
    pub fn new(id: usize, position: Vector3<f64>) -> Self {
        Self { id, position }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn position(&self) -> &Vector3<f64> {
        &self.position
    }
}

/// Constant system matrices for a given sampling period, plus the extreme
/// eigenvalues of `A3·A3ᵀ` and `B3·B3ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    t: f64,
    a3: Matrix6,
    b3: Matrix6x3,
    a2: Matrix4<f64>,
    b2: Matrix4x2<f64>,
    f: Matrix2x3<f64>,
    a_lo: f64,
    a_hi: f64,
    b_hi: f64,
}

impl SystemMatrices {
    pub fn new(t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Config(format!(
                "sampling period must be positive and finite, got {t}"
            )));
        }
        let mut a3 = Matrix6::identity();
        a3.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(SMatrix::<f64, 3, 3>::identity() * t));
        let mut b3 = Matrix6x3::zeros();
        b3.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(SMatrix::<f64, 3, 3>::identity() * (0.5 * t * t)));
        b3.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(SMatrix::<f64, 3, 3>::identity() * t));

        let mut a2 = Matrix4::identity();
        a2[(0, 2)] = t;
        a2[(1, 3)] = t;
        let mut b2 = Matrix4x2::zeros();
        b2[(0, 0)] = 0.5 * t * t;
        b2[(1, 1)] = 0.5 * t * t;
        b2[(2, 0)] = t;
        b2[(3, 1)] = t;

        let root = t * (4.0 + t * t).sqrt();
        Ok(Self {
            t,
            a3,
            b3,
            a2,
            b2,
            f: Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
            a_lo: (2.0 + t * t - root) / 2.0,
            a_hi: (2.0 + t * t + root) / 2.0,
            b_hi: t.powi(4) / 4.0 + t * t,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn a3(&self) -> &Matrix6 {
        &self.a3
    }
    pub fn b3(&self) -> &Matrix6x3 {
        &self.b3
    }
    pub fn a2(&self) -> &Matrix4<f64> {
        &self.a2
    }
    pub fn b2(&self) -> &Matrix4x2<f64> {
        &self.b2
    }
    pub fn f(&self) -> &Matrix2x3<f64> {
        &self.f
    }
    pub fn a_lo(&self) -> f64 {
        self.a_lo
    }
    pub fn a_hi(&self) -> f64 {
        self.a_hi
    }
    pub fn b_hi(&self) -> f64 {
        self.b_hi
    }

    /// `Fᵀ·p`: lift a ground-plane vector into 3-D with zero altitude component.
    pub fn lift(&self, p: &Vector2<f64>) -> Vector3<f64> {
        self.f.transpose() * p
    }
}

/// `(a_lo, a_hi, b_hi)`: extreme eigenvalue bounds of the drone model.
pub fn eigen_bounds(mats: &SystemMatrices) -> (f64, f64, f64) {
    (mats.a_lo, mats.a_hi, mats.b_hi)
}

/// Rotating circle of offsets `ρ·[sin(kπ/ℓ), cos(kπ/ℓ)]` around a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetShape {
    pub rho: f64,
    pub ell: u32,
}

impl PresetShape {
    pub fn new(rho: f64, ell: u32) -> Result<Self> {
        let shape = Self { rho, ell };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Config(format!("shape radius must be positive, got {}", self.rho)));
        }
        if self.ell < 4 {
            return Err(Error::Config(format!(
                "shape period parameter must be at least 4, got {}",
                self.ell
            )));
        }
        Ok(())
    }

    /// Circumnavigation frequency `1/ℓ`.
    pub fn nu_bar(&self) -> f64 {
        1.0 / f64::from(self.ell)
    }

    pub fn offset(&self, k: usize) -> Vector2<f64> {
        preset_shape(k, self)
    }
}

/// Offset of the preset shape at step `k`.
///
/// `k` is reduced modulo the period `2ℓ` before the angle is formed, so the
/// result is exactly periodic and does not lose precision for large `k`.
pub fn preset_shape(k: usize, shape: &PresetShape) -> Vector2<f64> {
    let period = 2 * shape.ell as usize;
    let reduced = (k % period) as f64;
    let angle = reduced * PI / f64::from(shape.ell);
    Vector2::new(shape.rho * angle.sin(), shape.rho * angle.cos())
}

fn check_finite<const N: usize>(what: &str, v: &SMatrix<f64, N, 1>) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::ModelInput(format!("{what} has non-finite components: {v:?}")))
    }
}

/// One sampling period of the drone double integrator.
pub fn step_drone(state: &DroneState, u: &Vector3<f64>, mats: &SystemMatrices) -> Result<DroneState> {
    check_finite("acceleration", u)?;
    if !state.is_finite() {
        return Err(Error::ModelInput(format!("drone {} state is not finite", state.id)));
    }
    let t = mats.t;
    Ok(DroneState {
        id: state.id,
        position: state.position + state.velocity * t + u * (0.5 * t * t),
        velocity: state.velocity + u * t,
    })
}

/// One sampling period of the target model `η⁺ = A2·η + B2·ω`.
pub fn step_target(state: &TargetState, omega: &Vector2<f64>, mats: &SystemMatrices) -> Result<TargetState> {
    check_finite("target acceleration", omega)?;
    if !state.is_finite() {
        return Err(Error::ModelInput(format!("target {} state is not finite", state.id)));
    }
    let next = mats.a2 * state.eta() + mats.b2 * omega;
    Ok(TargetState::from_eta(state.id, &next))
}
