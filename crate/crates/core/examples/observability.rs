//! Windowed observability of the range-difference measurement, and the
//! controllability Gramian of the target model.

use encircle::analysis::{controllability_gramian, observability_gramian, on_shape_window, WindowSample};
use encircle::model::PresetShape;
use nalgebra::{Matrix2, Vector2};

pub fn run_example() -> encircle::Result<()> {
    let t = 0.8;
    let shape = PresetShape::new(0.5, 24)?;

    let rotating = observability_gramian(&on_shape_window(&shape, 40, 31, 0.01), t)?;
    println!(
        "pair on the preset shape: rank {} min eig {:.3e} observable {}",
        rotating.rank, rotating.min_eigenvalue, rotating.observable
    );

    // A baseline that never turns sees only one direction.
    let fixed: Vec<WindowSample> = (0..31)
        .map(|_| WindowSample {
            baseline: Vector2::new(1.0, 0.0),
            var_hat: 0.01,
        })
        .collect();
    let collinear = observability_gramian(&fixed, t)?;
    println!(
        "fixed baseline: rank {} min eig {:.3e} observable {}",
        collinear.rank, collinear.min_eigenvalue, collinear.observable
    );

    let ctrl = controllability_gramian(30, t, &(Matrix2::identity() * 0.05))?;
    println!(
        "controllability over 31 steps: eigenvalues {:?} positive definite {}",
        ctrl.eigenvalues, ctrl.positive_definite
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> encircle::Result<()> {
    run_example()
}
