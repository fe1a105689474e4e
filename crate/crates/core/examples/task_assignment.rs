//! Distributed auction and consensus over the golden layout, then the
//! smallest possible team.

use encircle::assignment::{run_assignment, AssignmentConfig, AssignmentInput};
use encircle::harness::ScenarioConfig;
use encircle::sensing::{ground_distance, neighbor_set, visible_targets};

pub fn run_example() -> encircle::Result<()> {
    let cfg = ScenarioConfig::golden();
    let drones = cfg.initial_drones();
    let targets = cfg.initial_targets();
    let input = AssignmentInput {
        targets: targets.len(),
        distances: drones
            .iter()
            .map(|d| {
                visible_targets(d, &targets, &cfg.sensor)
                    .into_iter()
                    .map(|j| (j, ground_distance(d, &targets[j])))
                    .collect()
            })
            .collect(),
        neighbors: drones.iter().map(|d| neighbor_set(d, &drones, &cfg.sensor)).collect(),
    };
    let out = run_assignment(&input, &cfg.assignment)?;
    println!("golden layout: {} round(s)", out.rounds);
    for (j, (i, g)) in &out.pairs {
        println!("  target {j} <- drones {i} and {g}");
    }
    for r in out.trace.iter().filter(|r| r.released.is_some()) {
        println!(
            "  round {} drone {} released target {:?} for {:?}",
            r.round, r.drone, r.released, r.boosted
        );
    }

    let pair = AssignmentInput {
        targets: 1,
        distances: vec![vec![(0, 2.0)], vec![(0, 3.0)]],
        neighbors: vec![vec![1], vec![0]],
    };
    let out = run_assignment(&pair, &AssignmentConfig::default())?;
    println!("one target, two drones: {:?} in {} round(s)", out.pairs[&0], out.rounds);
    Ok(())
}

#[allow(dead_code)]
fn main() -> encircle::Result<()> {
    run_example()
}
