//! Consensus while the set of usable links changes every iteration.
//!
//! Convergence survives as long as every active set keeps a fixed
//! connected core: here a spanning tree stays up while the remaining
//! links of a complete graph flap at random.

use pdm::linalg::BlockVector;
use pdm::problem::ProblemInstance;
use pdm::solver::{run, StepsizeMode, StepsizePolicy, StoppingRule};
use pdm::topology::{CommGraph, ScheduleKind, TopologySchedule};

fn main() -> Result<(), pdm::Error> {
    let m = 6;
    let graph = CommGraph::complete(m);
    let core = graph.spanning_tree().expect("complete graph is connected");
    println!(
        "graph: {} vertices, {} arcs, core arcs {:?}",
        m,
        graph.arc_count(),
        core.members()
    );

    let centers: Vec<Vec<f64>> = (0..m).map(|i| vec![i as f64]).collect();
    let prob = ProblemInstance::quadratic_consensus(&graph, 1, centers, None)?;

    let schedule = TopologySchedule::new(
        graph,
        ScheduleKind::RandomWithCore {
            core,
            extra_probability: 0.3,
            seed: 17,
        },
    )?;

    // the stepsize shrinks automatically when more arcs are active,
    // since it is tied to the operator norm of the active constraints
    let policy = StepsizePolicy::new(0.1, StepsizeMode::PerIterationNorm)?;

    let result = run(
        &prob,
        &schedule,
        &policy,
        &StoppingRule { epsilon: 1e-9 },
        30_000,
        &BlockVector::zeros(m, 1),
    )?;

    println!("stopped: {} after {} iterations", result.stop.as_str(), result.state.k);
    for r in result.trace.iter().take(8) {
        println!(
            "k={:<3} active={} lambda={:.4} residual={:.3e}",
            r.k, r.active_count, r.lambda, r.full_residual
        );
    }
    println!("...");
    let last = result.trace.last().unwrap();
    println!(
        "k={:<3} active={} lambda={:.4} residual={:.3e}",
        last.k, last.active_count, last.lambda, last.full_residual
    );
    println!("final consensus value: {:.6} (mean is 2.5)", result.state.x.block(0)[0]);
    Ok(())
}
