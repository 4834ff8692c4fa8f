#![allow(clippy::needless_range_loop)]

//! Property tests for the structural invariants: adjoint consistency,
//! Laplacian factorization of consensus systems, degree bounds, schedule
//! determinism, dual support discipline, and the basic-set oracle.

use proptest::prelude::*;

use pdm::linalg::{ArcConstraintSystem, ArcRow, BlockVector, DenseMatrix, DualVector, IndexSet};
use pdm::problem::ProblemInstance;
use pdm::solver::{pdm_step, PdmState, StepsizeMode, StepsizePolicy};
use pdm::topology::{CommGraph, ScheduleKind, TopologySchedule};

/// All arcs of the complete graph on `m` vertices, lexicographic.
fn complete_arcs(m: usize) -> Vec<(usize, usize)> {
    let mut arcs = Vec::new();
    for s in 0..m {
        for t in s + 1..m {
            arcs.push((s, t));
        }
    }
    arcs
}

fn arb_graph() -> impl Strategy<Value = CommGraph> {
    (2usize..=5).prop_flat_map(|m| {
        let all = complete_arcs(m);
        let l = all.len();
        (0usize..(1usize << l)).prop_map(move |mask| {
            let arcs: Vec<(usize, usize)> = all
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, a)| *a)
                .collect();
            CommGraph::new(m, &arcs).unwrap()
        })
    })
}

fn arb_subset(l: usize) -> BoxedStrategy<IndexSet> {
    if l == 0 {
        Just(IndexSet::empty(0)).boxed()
    } else {
        (0usize..(1usize << l))
            .prop_map(move |mask| {
                IndexSet::new(l, (0..l).filter(|i| mask >> i & 1 == 1).collect()).unwrap()
            })
            .boxed()
    }
}

fn arb_values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0..10.0f64, len)
}

proptest! {
    /// <A_I x, y> = <x, A_I^T y> for dual vectors supported on I.
    #[test]
    fn adjoint_identity(
        (graph, n, seed_x, seed_y, set) in arb_graph().prop_flat_map(|g| {
            let l = g.arc_count();
            let m = g.vertex_count();
            (1usize..=3).prop_flat_map(move |n| {
                let g = g.clone();
                (
                    Just(g.clone()),
                    Just(n),
                    arb_values(m * n),
                    arb_values(l * n),
                    arb_subset(l),
                )
            })
        })
    ) {
        let m = graph.vertex_count();
        let l = graph.arc_count();
        let system = ArcConstraintSystem::consensus(m, n, graph.arcs()).unwrap();
        let x = BlockVector::from_vec(m, n, seed_x).unwrap();
        let y_full = BlockVector::from_vec(l.max(1), n, if l == 0 { vec![0.0; n] } else { seed_y }).unwrap();
        if l == 0 {
            return Ok(());
        }
        let y = DualVector::restrict(&y_full, &set);
        let ax = system.apply(&set, &x).unwrap();
        let aty = system.apply_transpose(&set, &y).unwrap();
        let mut lhs = 0.0;
        for i in set.iter() {
            let yb = y.get(i).unwrap();
            for j in 0..n {
                lhs += ax.block(i)[j] * yb[j];
            }
        }
        let rhs = x.dot(&aty);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
    }

    /// For consensus systems, A_I^T A_I acts as the Kirchhoff matrix of
    /// the active subgraph applied blockwise (H_I ⊗ E).
    #[test]
    fn laplacian_factorization(
        (graph, n, seed_x, set) in arb_graph().prop_flat_map(|g| {
            let l = g.arc_count();
            let m = g.vertex_count();
            (1usize..=3).prop_flat_map(move |n| {
                let g = g.clone();
                (Just(g.clone()), Just(n), arb_values(m * n), arb_subset(l))
            })
        })
    ) {
        if graph.arc_count() == 0 {
            return Ok(());
        }
        let m = graph.vertex_count();
        let system = ArcConstraintSystem::consensus(m, n, graph.arcs()).unwrap();
        let x = BlockVector::from_vec(m, n, seed_x).unwrap();
        let ax = system.apply(&set, &x).unwrap();
        let dual = DualVector::restrict(&ax, &set);
        let atax = system.apply_transpose(&set, &dual).unwrap();
        let h = graph.kirchhoff(&set);
        for i in 0..m {
            for j in 0..n {
                let mut expect = 0.0;
                for t in 0..m {
                    expect += h.get(i, t) * x.block(t)[j];
                }
                prop_assert!((atax.block(i)[j] - expect).abs() <= 1e-10);
            }
        }
    }

    /// ‖A_I‖ ≤ sqrt(2 max-degree) on every nonempty active set.
    #[test]
    fn degree_bound_on_operator_norm(
        (graph, set) in arb_graph().prop_flat_map(|g| {
            let l = g.arc_count();
            (Just(g), arb_subset(l))
        })
    ) {
        prop_assume!(!set.is_empty());
        let m = graph.vertex_count();
        let system = ArcConstraintSystem::consensus(m, 2, graph.arcs()).unwrap();
        let norm = system.operator_norm(&set, 1e-10).unwrap();
        let bound = (2.0 * graph.max_degree(&set) as f64).sqrt();
        prop_assert!(norm <= bound + 1e-8, "norm {norm} bound {bound}");
    }

    /// The union-find fast path of the basic-set test agrees with the
    /// dense rank path on the same system rewritten with dense rows.
    #[test]
    fn basic_set_paths_agree(
        (graph, set) in arb_graph().prop_flat_map(|g| {
            let l = g.arc_count();
            (Just(g), arb_subset(l))
        })
    ) {
        let m = graph.vertex_count();
        let l = graph.arc_count();
        let full = IndexSet::full(l);
        let consensus = ArcConstraintSystem::consensus(m, 1, graph.arcs()).unwrap();
        let rows: Vec<ArcRow> = graph
            .arcs()
            .iter()
            .map(|&(s, t)| {
                let mut mat = DenseMatrix::zeros(1, m);
                mat.set(0, s, 1.0);
                mat.set(0, t, -1.0);
                ArcRow::Dense(mat)
            })
            .collect();
        let dense = ArcConstraintSystem::new(m, 1, rows, BlockVector::zeros(l.max(1), 1)).unwrap();
        let fast = consensus.is_basic_index_set(&set, &full).unwrap();
        let slow = dense.is_basic_index_set(&set, &full).unwrap();
        prop_assert_eq!(fast, slow);
        // and both match subgraph connectivity structure
        prop_assert_eq!(fast, same_components(&graph, &set));
    }

    /// Random schedules are pure functions of (seed, k): any evaluation
    /// order yields the same sets, and the core is always included.
    #[test]
    fn schedule_random_access(seed in any::<u64>(), p in 0.0..1.0f64) {
        let graph = CommGraph::complete(4);
        let l = graph.arc_count();
        let core = IndexSet::new(l, vec![0, 1, 2]).unwrap();
        let schedule = TopologySchedule::new(
            graph,
            ScheduleKind::RandomWithCore { core: core.clone(), extra_probability: p, seed },
        )
        .unwrap();
        let forward: Vec<IndexSet> = (1..=20).map(|k| schedule.next(k)).collect();
        let backward: Vec<IndexSet> = (1..=20).rev().map(|k| schedule.next(k)).collect();
        for (k, set) in forward.iter().enumerate() {
            prop_assert_eq!(set, &backward[19 - k]);
            prop_assert!(core.is_subset_of(set));
        }
    }

    /// After a step, the dual support equals the active set and inactive
    /// duals read as zero.
    #[test]
    fn dual_support_matches_active_set(
        (set, seed_x) in (arb_subset(3), arb_values(3))
    ) {
        let graph = CommGraph::complete(3);
        let prob = ProblemInstance::quadratic_consensus(
            &graph,
            1,
            vec![vec![0.0], vec![1.0], vec![-1.0]],
            None,
        )
        .unwrap();
        let x0 = BlockVector::from_vec(3, 1, seed_x).unwrap();
        let state = PdmState::initial(&prob, &x0).unwrap();
        let next = pdm_step(&prob, &state, &set, 0.3, 1e-12).unwrap();
        prop_assert_eq!(next.y.active(), &set);
        for i in 0..3 {
            if !set.contains(i) {
                prop_assert!(next.y.get(i).is_none());
            }
        }
    }

    /// The per-iteration-norm stepsize always lands in [tau, upper] and
    /// scales down when more arcs activate.
    #[test]
    fn stepsize_within_interval(
        (graph, set) in arb_graph().prop_flat_map(|g| {
            let l = g.arc_count();
            (Just(g), arb_subset(l))
        })
    ) {
        let m = graph.vertex_count();
        let system = ArcConstraintSystem::consensus(m, 1, graph.arcs()).unwrap();
        let tau = 0.05;
        let policy = StepsizePolicy::new(tau, StepsizeMode::PerIterationNorm).unwrap();
        match policy.stepsize(&system, &set) {
            Ok(lambda) => {
                prop_assert!(lambda >= tau - 1e-15);
                if !set.is_empty() {
                    let norm = system.operator_norm(&set, 1e-10).unwrap();
                    let upper = (1.0 - tau).sqrt() / (2.0f64.sqrt() * norm);
                    prop_assert!(lambda <= upper + 1e-12);
                }
            }
            Err(pdm::Error::EmptyStepsizeInterval { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
        }
    }
}

/// True iff the arcs of `set` induce the same vertex partition as the
/// whole graph.
fn same_components(graph: &CommGraph, set: &IndexSet) -> bool {
    let m = graph.vertex_count();
    let comp = |arcs: Vec<(usize, usize)>| -> Vec<usize> {
        // label vertices by smallest reachable vertex
        let mut label: Vec<usize> = (0..m).collect();
        loop {
            let mut changed = false;
            for &(s, t) in &arcs {
                let lo = label[s].min(label[t]);
                if label[s] != lo || label[t] != lo {
                    label[s] = lo;
                    label[t] = lo;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        label
    };
    let sub: Vec<(usize, usize)> = set.iter().map(|i| graph.arc(i)).collect();
    comp(sub) == comp(graph.arcs().to_vec())
}

#[test]
fn projection_and_restriction_roundtrip() {
    let full_values = BlockVector::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let set = IndexSet::new(3, vec![0, 2]).unwrap();
    let y = DualVector::restrict(&full_values, &set);
    // projecting onto the same set is the identity
    assert_eq!(y.project(&set), y);
    // projecting onto a subset drops the complement
    let sub = IndexSet::new(3, vec![2]).unwrap();
    let p = y.project(&sub);
    assert!(p.get(0).is_none());
    assert_eq!(p.get(2).unwrap(), &[5.0, 6.0]);
    // round trip through the dense representation preserves values
    let dense = y.to_block_vector();
    assert_eq!(dense.block(1), &[0.0, 0.0]);
    assert_eq!(DualVector::restrict(&dense, &set), y);
}
