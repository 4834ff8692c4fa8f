//! The convergence engine behind the method is a per-step contraction of
//! the distance to a reference saddle point. This example verifies it on
//! a healthy run, then shows the check flagging a stepsize that violates
//! the admissible interval.

use pdm::linalg::BlockVector;
use pdm::problem::{PenaltyPower, ProblemInstance};
use pdm::solver::{check_fejer, run, StepsizeMode, StepsizePolicy, StoppingRule};
use pdm::topology::{CommGraph, ScheduleKind, TopologySchedule};

fn main() -> Result<(), pdm::Error> {
    // feasibility instance: each agent enforces one halfspace by penalty;
    // any common feasible point with zero duals is a valid reference for
    // every active set, which makes the check applicable under random
    // schedules
    let graph = CommGraph::complete(4);
    let halfspaces = vec![
        (vec![1.0, 0.0], 1.0),
        (vec![0.0, 1.0], 1.0),
        (vec![-1.0, -1.0], 0.5),
        (vec![1.0, 1.0], 1.5),
    ];
    let prob = ProblemInstance::penalized_feasibility(
        &graph,
        2,
        halfspaces,
        PenaltyPower::Quadratic,
        Some(vec![0.2, 0.2]),
    )?;
    let core = graph.spanning_tree().unwrap();
    let schedule = TopologySchedule::new(
        graph,
        ScheduleKind::RandomWithCore {
            core,
            extra_probability: 0.5,
            seed: 11,
        },
    )?;
    let tau = 0.1;
    let x0 = BlockVector::from_vec(4, 2, vec![3.0, -1.0, 2.0, 2.0, -4.0, 0.5, 1.0, 1.0])?;
    let stop = StoppingRule { epsilon: 0.0 };

    let good = StepsizePolicy::new(tau, StepsizeMode::PerIterationNorm)?;
    let result = run(&prob, &schedule, &good, &stop, 1_000, &x0)?;
    let report = check_fejer(&result, tau, 1e-9, 0)?;
    println!(
        "admissible stepsize: contraction held at all {} steps: {}",
        report.checked, report.pass
    );

    // 4x beyond the admissible upper endpoint: the iteration expands and
    // the check pinpoints the first violated step
    let bad = StepsizePolicy::new(tau, StepsizeMode::Constant { value: 2.0 })?;
    let result = run(&prob, &schedule, &bad, &stop, 1_000, &x0)?;
    let report = check_fejer(&result, tau, 1e-9, 0)?;
    println!("oversized stepsize:  contraction held: {}", report.pass);
    if let Some(v) = report.first_violation {
        println!(
            "  first violation at k={}: {:.6e} > {:.6e}",
            v.k, v.lhs, v.rhs
        );
    }
    Ok(())
}
