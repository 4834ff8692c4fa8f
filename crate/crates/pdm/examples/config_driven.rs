//! Experiments as JSON documents: the same configs the `pdm` binary
//! consumes can be built and executed programmatically.

use pdm::config::{execute_solve, execute_verify, Engine, ExperimentConfig};

fn main() -> Result<(), pdm::Error> {
    let mut config: ExperimentConfig = serde_json::from_str(
        r#"{
            "problem": {
                "kind": "quadratic_consensus",
                "dim": 2,
                "centers": [[0.0, 1.0], [2.0, -1.0], [4.0, 0.0], [6.0, 2.0]]
            },
            "graph": { "kind": "complete", "vertices": 4 },
            "schedule": {
                "kind": "cyclic",
                "sets": [[0, 1, 2], [0, 1, 2, 3], [0, 1, 2, 4, 5]]
            },
            "stepsize": { "mode": "per_iteration_norm", "tau": 0.1 },
            "epsilon": 1e-9,
            "budget": 20000,
            "engine": "both"
        }"#,
    )?;
    config.validate()?;

    let outcome = execute_solve(&config)?;
    println!(
        "stop: {} after {} iterations, {} messages on the wire",
        outcome.result.stop.as_str(),
        outcome.result.state.k,
        outcome.messages
    );
    if let Some(cmp) = &outcome.compare {
        println!(
            "engine deviation: x {:.3e}, y {:.3e}",
            cmp.max_x_dev, cmp.max_y_dev
        );
    }

    // the verify command runs the same checks the binary exposes
    config.engine = Engine::Centralized;
    for check in execute_verify(&config)? {
        println!(
            "{:<22} {}  {}",
            check.name,
            if check.pass { "PASS" } else { "FAIL" },
            check.detail
        );
    }
    Ok(())
}
