//! Golden geometry with noise off, the true target state fed to the
//! controller and only attraction: every drone reaches its slot in one step.

use encircle::harness::{run_scenario, ScenarioConfig};

pub fn run_example() -> encircle::Result<()> {
    let run = run_scenario(&ScenarioConfig::deadbeat())?;
    for r in run.records.iter().take(3) {
        let errs: Vec<String> = r.metrics.targets.iter().map(|t| format!("{:.2e}", t.as_norm)).collect();
        println!("k = {}: ‖ē‖ per target [{}]", r.k, errs.join(", "));
    }
    let worst = run
        .records
        .iter()
        .filter(|r| r.k >= 1)
        .flat_map(|r| r.metrics.targets.iter().map(|t| t.as_norm))
        .fold(0.0, f64::max);
    println!("largest ‖ē‖ over k >= 1: {worst:.2e} m");
    Ok(())
}

#[allow(dead_code)]
fn main() -> encircle::Result<()> {
    run_example()
}
