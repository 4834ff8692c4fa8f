//! Weighted least-squares consensus with per-agent box constraints. The
//! prox steps stay in closed form because each block objective is a
//! diagonal quadratic and the box projection is coordinate-wise.

use pdm::linalg::BlockVector;
use pdm::problem::{FeasibleSet, ProblemInstance};
use pdm::sim::run_pdmi;
use pdm::solver::{StepsizeMode, StepsizePolicy, StoppingRule};
use pdm::topology::{CommGraph, TopologySchedule};

fn main() -> Result<(), pdm::Error> {
    let m = 4;
    let graph = CommGraph::path(m);
    let weights = vec![1.0, 3.0, 0.5, 2.0];
    let centers = vec![vec![0.0], vec![4.0], vec![-2.0], vec![1.0]];
    // agent 1 cannot move below 0.5, agent 2 is capped at 0.8
    let boxes = vec![
        FeasibleSet::WholeSpace,
        FeasibleSet::validated_box(vec![0.5], vec![10.0])?,
        FeasibleSet::validated_box(vec![-10.0], vec![0.8])?,
        FeasibleSet::WholeSpace,
    ];
    let prob = ProblemInstance::constrained_least_squares(&graph, 1, weights.clone(), centers.clone(), boxes)?;

    let schedule = TopologySchedule::static_full(graph);
    let policy = StepsizePolicy::new(0.1, StepsizeMode::PerIterationNorm)?;
    let run = run_pdmi(
        &prob,
        &schedule,
        &policy,
        &StoppingRule { epsilon: 1e-10 },
        50_000,
        &BlockVector::zeros(m, 1),
    )?;

    // unconstrained optimum would be the weighted mean
    let wsum: f64 = weights.iter().sum();
    let wmean: f64 = weights
        .iter()
        .zip(&centers)
        .map(|(w, c)| w * c[0])
        .sum::<f64>()
        / wsum;
    println!("weighted mean (ignoring boxes): {wmean:.6}");
    println!(
        "consensus value with boxes:     {:.6}",
        run.result.state.x.block(0)[0]
    );
    println!(
        "stopped: {} after {} rounds, {} messages",
        run.result.stop.as_str(),
        run.result.state.k,
        run.ledger.len()
    );
    Ok(())
}
