//! Where the stepsize comes from: the operator norm of the active
//! constraint rows, estimated by power iteration, and its cheap
//! degree-based upper bound that agents can evaluate locally.

use pdm::linalg::{ArcConstraintSystem, IndexSet};
use pdm::solver::{StepsizeMode, StepsizePolicy};
use pdm::topology::CommGraph;

fn main() -> Result<(), pdm::Error> {
    let graph = CommGraph::complete(6);
    let system = ArcConstraintSystem::consensus(6, 1, graph.arcs())?;
    let l = graph.arc_count();

    println!("{:<22} {:>8} {:>12} {:>12}", "active set", "norm", "degree bound", "stepsize");
    let tau = 0.1;
    let policy = StepsizePolicy::new(tau, StepsizeMode::PerIterationNorm)?;
    for (name, set) in [
        ("single arc", IndexSet::new(l, vec![0])?),
        ("spanning star", graph.spanning_tree().unwrap()),
        ("all arcs", IndexSet::full(l)),
    ] {
        let norm = system.operator_norm(&set, 1e-10)?;
        let bound = (2.0 * graph.max_degree(&set) as f64).sqrt();
        let lambda = policy.stepsize(&system, &set)?;
        println!("{name:<22} {norm:>8.5} {bound:>12.5} {lambda:>12.6}");
    }

    // the degree bound never undershoots the true norm, so a policy that
    // fixes the stepsize from the worst-case degree is always admissible
    // and needs no spectral computation at runtime
    let fixed = StepsizePolicy::new(tau, StepsizeMode::FixedUpperBound { max_degree: 5 })?;
    let lambda = fixed.stepsize(&system, &IndexSet::full(l))?;
    println!("degree-5 fixed policy: lambda = {lambda:.6}");

    // basic index sets: arc subsets whose constraints already imply all
    // consensus constraints; for these the subset is as good as the graph
    let tree = graph.spanning_tree().unwrap();
    println!(
        "spanning tree is basic: {}",
        system.is_basic_index_set(&tree, &IndexSet::full(l))?
    );
    let pair = IndexSet::new(l, vec![0, 1])?;
    println!(
        "two arcs are basic:     {}",
        system.is_basic_index_set(&pair, &IndexSet::full(l))?
    );
    Ok(())
}
