//! A seed batch of the golden scenario with pooled statistics and the
//! mean-square bound `MS‖ē‖² ≤ 4·a_hi·MS‖e‖² + 2t⁴·q̌`.

use encircle::analysis::theorem_bounds;
use encircle::harness::{run_monte_carlo, ScenarioConfig};

pub fn run_example() -> encircle::Result<()> {
    let cfg = ScenarioConfig::golden();
    let seeds: Vec<u64> = (1..=8).collect();
    let report = run_monte_carlo(&cfg, &seeds)?;
    println!("{} seeds, {} failed", report.seeds.len(), report.failed);
    for p in &report.pooled {
        println!(
            "target {}: {} samples, MS‖e‖² {:.3e}, MS‖ē‖² {:.3e}, within {} m: {:.1}%",
            p.target_id,
            p.samples,
            p.ms_estimation,
            p.ms_as,
            cfg.error_threshold,
            100.0 * p.occupancy
        );
    }
    let a_hi = cfg.mats()?.a_hi();
    let bounds = theorem_bounds(&report.samples, a_hi, cfg.t, 0.05)?;
    for b in &bounds.targets {
        println!("target {}: {:.3e} <= {:.3e}: {}", b.target_id, b.ms_as, b.bound, b.holds);
    }
    println!(
        "collision violations {}, min drone distance {:.3} m",
        report.collision_violations,
        report.min_drone_distance.unwrap_or(f64::NAN)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> encircle::Result<()> {
    run_example()
}
