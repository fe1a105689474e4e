//! The three pseudo-forces on a single drone and the resulting command.

use encircle::controller::{
    accel_command, action_radius, apply_caps, attractive_force, interaction_force, repulsive_force,
    ControllerParams, ForceBreakdown, Role,
};
use encircle::model::{preset_shape, PresetShape, SystemMatrices};
use nalgebra::{Vector2, Vector3};

fn show(label: &str, fb: &ForceBreakdown) {
    println!(
        "{label}: at {:.3?} in {:.3?} re {:.3?} -> Γ {:.3?} (caps: in {}, re {})",
        fb.at.as_slice(),
        fb.inter_capped.as_slice(),
        fb.rep_capped.as_slice(),
        fb.resultant.as_slice(),
        fb.inter_cap_fired,
        fb.rep_cap_fired
    );
}

pub fn run_example() -> encircle::Result<()> {
    let mats = SystemMatrices::new(0.8)?;
    let params = ControllerParams::default();
    let shape = PresetShape::new(0.5, 24)?;

    let s_hat = Vector2::new(2.0, 1.0);
    let nu_hat = Vector2::new(0.1, 0.0);
    let r_bar = action_radius(&nu_hat, &params, &mats);
    println!("action radius {r_bar:.3} m");

    // Two drones converging on opposite sides of the same target.
    let x = Vector3::new(2.9, 1.2, 2.0);
    let neighbor = Vector3::new(3.3, 1.5, 2.0);
    let obstacle = Vector3::new(2.6, 1.1, 2.2);
    let at = attractive_force(Role::ISide, &x, &s_hat, &nu_hat, &preset_shape(3, &shape), &mats);

    let free = apply_caps(&ForceBreakdown::new(at, Vector3::zeros(), Vector3::zeros()), &params);
    show("alone", &free);

    let inter = interaction_force(&x, &[neighbor], &params, r_bar);
    let rep = repulsive_force(&x, &[obstacle], &[], &params, r_bar);
    let crowded = apply_caps(&ForceBreakdown::new(at, inter, rep), &params);
    show("crowded", &crowded);

    let v = Vector3::new(0.3, 0.0, 0.0);
    let u = accel_command(&crowded, &v, &params, &mats);
    println!("command u = {:.3?}", u.as_slice());
    Ok(())
}

#[allow(dead_code)]
fn main() -> encircle::Result<()> {
    run_example()
}
