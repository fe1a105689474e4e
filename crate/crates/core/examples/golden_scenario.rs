//! Six drones, three ground targets and two obstacles, 400 steps.
//!
//! Prints the assignment, post-transient error statistics and the collision
//! audit. Pass a directory to also write the run files there.

use std::path::Path;

use encircle::harness::{run_scenario, write_run, ScenarioConfig};

pub fn run_example(out: Option<&Path>) -> encircle::Result<()> {
    let cfg = ScenarioConfig::golden();
    let run = run_scenario(&cfg)?;
    let s = &run.summary;

    println!("assignment converged in {} round(s)", s.assignment_rounds);
    for t in &s.targets {
        let e = t.estimation_quantiles.expect("post-transient samples");
        let a = t.as_quantiles.expect("post-transient samples");
        println!(
            "target {}: drones {:?}  ‖e‖ p50 {:.3} p90 {:.3}  ‖ē‖ p50 {:.3} p90 {:.3}  within {:.1}: {:.0}%",
            t.target_id,
            t.pair,
            e.p50,
            e.p90,
            a.p50,
            a.p90,
            s.error_threshold,
            100.0 * t.occupancy
        );
    }
    println!(
        "min drone distance {:.3} m, min obstacle distance {:.3} m, violations {}",
        s.audit.min_drone_distance.unwrap_or(f64::NAN),
        s.audit.min_obstacle_distance.unwrap_or(f64::NAN),
        s.audit.drone_violations.len() + s.audit.obstacle_violations.len()
    );
    println!(
        "avoidance steps {}, cap events {}, saturated commands {}, max z drift {:.2e} m",
        s.avoidance_steps, s.cap_events, s.saturation_events, s.max_z_drift
    );
    println!("log hash {}", s.log_hash);

    if let Some(dir) = out {
        write_run(dir, &cfg, &run)?;
        println!("run files written to {}", dir.display());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> encircle::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    run_example(out.as_deref())
}
