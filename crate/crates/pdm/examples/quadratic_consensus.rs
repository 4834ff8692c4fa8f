#![allow(clippy::needless_range_loop)]

//! Ten agents with private quadratic costs agree on the average of their
//! targets over a ring. The analytic answer is the coordinate-wise mean,
//! so the final error is printed against it.

use pdm::linalg::BlockVector;
use pdm::problem::ProblemInstance;
use pdm::solver::{run, StepsizeMode, StepsizePolicy, StoppingRule};
use pdm::topology::{CommGraph, TopologySchedule};

fn main() -> Result<(), pdm::Error> {
    let m = 10;
    let n = 3;
    let centers: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..n).map(|j| (i * n + j) as f64 / 2.0 - 5.0).collect())
        .collect();

    let graph = CommGraph::ring(m)?;
    let prob = ProblemInstance::quadratic_consensus(&graph, n, centers.clone(), None)?;
    let schedule = TopologySchedule::static_full(graph);
    let policy = StepsizePolicy::new(0.1, StepsizeMode::PerIterationNorm)?;

    let result = run(
        &prob,
        &schedule,
        &policy,
        &StoppingRule { epsilon: 1e-10 },
        20_000,
        &BlockVector::zeros(m, n),
    )?;

    let mut mean = vec![0.0; n];
    for c in &centers {
        for j in 0..n {
            mean[j] += c[j] / m as f64;
        }
    }

    println!("stopped: {} after {} iterations", result.stop.as_str(), result.state.k);
    println!("consensus target (mean): {mean:?}");
    println!("agent 0 block:           {:?}", result.state.x.block(0));
    let mut dev = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            dev = dev.max((result.state.x.block(i)[j] - mean[j]).abs());
        }
    }
    println!("max deviation from mean: {dev:.3e}");

    // the trace carries per-iteration diagnostics
    for r in result.trace.iter().step_by(result.trace.len() / 8) {
        println!(
            "k={:<6} residual={:.3e} step={:.3e}",
            r.k, r.full_residual, r.step_norm
        );
    }
    Ok(())
}
