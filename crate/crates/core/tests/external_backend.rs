//! Cross-checks the built-in solver against scipy's HiGHS through the
//! external adapter. Skipped when python3 with scipy is missing.

mod common;

use std::path::PathBuf;
use std::process::Command;
use std::time::Duration;

use common::*;
use vrpsa::expand::{expand_graph, PrunedNetwork};
use vrpsa::model::{build_exact_milp, build_resource_allocation_milp, ExactOptions};
use vrpsa::solve::{solve, Backend, SolveStatus};

fn scipy_backend() -> Option<Backend> {
    let ok = Command::new("python3")
        .args(["-c", "import scipy.optimize; scipy.optimize.milp"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false);
    if !ok {
        eprintln!("python3 with scipy not found; skipping");
        return None;
    }
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts/scipy_milp.py");
    Some(Backend::External {
        command: format!("python3 {} {{lp}} {{sol}} {{time_limit}}", script.display()),
    })
}

#[test]
fn external_and_builtin_agree_on_toys() {
    let Some(external) = scipy_backend() else { return };
    let spec = ToySpec {
        max_nodes: 6,
        max_customers: 3,
        av: 2,
        max_hdv: 1,
        max_intervals: 3,
        horizon_factor: 1.0,
        capacity: 2.0,
        unit_grid: false,
    };
    let limit = Duration::from_secs(60);
    let mut compared = 0;
    for seed in 0..6 {
        let inst = random_toy(500 + seed, &spec);
        let ge = expand_graph(&PrunedNetwork::whole(&inst.network), inst.layers, &inst.customer_nodes(), inst.depot).unwrap();
        let models = [
            build_exact_milp(&inst, &ge, &inst.time_grid(), ExactOptions::default()),
            build_resource_allocation_milp(&inst, &ge, ExactOptions::default()),
        ];
        for model in &models {
            let a = solve(model, &Backend::default(), limit).unwrap();
            let b = solve(model, &external, limit).unwrap();
            match (a.status, b.status) {
                (SolveStatus::Optimal, SolveStatus::Optimal) => {
                    let (x, y) = (a.objective.unwrap(), b.objective.unwrap());
                    assert!((x - y).abs() < 1e-6, "{}: builtin {x}, external {y}", model.name);
                    assert!(model.max_violation(&b.values) < 1e-6);
                    compared += 1;
                }
                (SolveStatus::Infeasible, SolveStatus::Infeasible) => {}
                (s, t) => panic!("{}: builtin {s:?}, external {t:?}", model.name),
            }
        }
    }
    assert!(compared > 0);
}
