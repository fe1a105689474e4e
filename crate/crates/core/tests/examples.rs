//! Every example runs to completion.

#[path = "../examples/config_file.rs"]
mod config_file;
#[path = "../examples/deadbeat.rs"]
mod deadbeat;
#[path = "../examples/golden_scenario.rs"]
mod golden_scenario;
#[path = "../examples/monte_carlo.rs"]
mod monte_carlo;
#[path = "../examples/observability.rs"]
mod observability;
#[path = "../examples/pseudo_forces.rs"]
mod pseudo_forces;
#[path = "../examples/range_estimation.rs"]
mod range_estimation;
#[path = "../examples/task_assignment.rs"]
mod task_assignment;

#[test]
fn config_file_runs() {
    config_file::run_example().unwrap();
}

#[test]
fn deadbeat_runs() {
    deadbeat::run_example().unwrap();
}

#[test]
fn golden_scenario_runs() {
    golden_scenario::run_example(None).unwrap();
}

#[test]
fn golden_scenario_writes_run_files() {
    let dir = tempfile::tempdir().unwrap();
    golden_scenario::run_example(Some(dir.path())).unwrap();
    assert!(dir.path().join("steps.jsonl").exists());
}

#[test]
fn monte_carlo_runs() {
    monte_carlo::run_example().unwrap();
}

#[test]
fn observability_runs() {
    observability::run_example().unwrap();
}

#[test]
fn pseudo_forces_runs() {
    pseudo_forces::run_example().unwrap();
}

#[test]
fn range_estimation_runs() {
    range_estimation::run_example().unwrap();
}

#[test]
fn task_assignment_runs() {
    task_assignment::run_example().unwrap();
}
