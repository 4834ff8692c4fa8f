//! Communication graphs, Kirchhoff (Laplacian) matrices, degree bounds,
//! connectivity, and active-arc schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, IndexSet};
use crate::union_find::UnionFind;

/// Undirected communication graph over `m` agents with a fixed orientation:
/// each edge `{s,t}` is stored once as the oriented arc `(s,t)` with `s < t`,
/// and arcs are indexed lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    m: usize,
    arcs: Vec<(usize, usize)>,
}

impl CommGraph {
    pub fn new(m: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "at least one vertex required"));
        }
        let mut arcs = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a == b {
                return Err(Error::invalid("edges", format!("self loop at {a}")));
            }
            if a >= m || b >= m {
                return Err(Error::invalid(
                    "edges",
                    format!("vertex out of range in ({a},{b})"),
                ));
            }
            arcs.push((a.min(b), a.max(b)));
        }
        arcs.sort_unstable();
        let before = arcs.len();
        arcs.dedup();
        if arcs.len() != before {
            return Err(Error::invalid("edges", "duplicate edge"));
        }
        Ok(CommGraph { m, arcs })
    }

    pub fn complete(m: usize) -> Self {
        let mut pairs = Vec::new();
        for s in 0..m {
            for t in s + 1..m {
                pairs.push((s, t));
            }
        }
        CommGraph::new(m, &pairs).expect("complete graph is valid")
    }

    pub fn path(m: usize) -> Self {
        let pairs: Vec<_> = (0..m.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        CommGraph::new(m, &pairs).expect("path graph is valid")
    }

    pub fn ring(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::invalid("m", "ring needs at least 3 vertices"));
        }
        let mut pairs: Vec<_> = (0..m - 1).map(|i| (i, i + 1)).collect();
        pairs.push((0, m - 1));
        CommGraph::new(m, &pairs)
    }

    pub fn star(m: usize) -> Self {
        let pairs: Vec<_> = (1..m).map(|t| (0, t)).collect();
        CommGraph::new(m, &pairs).expect("star graph is valid")
    }

    /// Erdős–Rényi graph: each pair independently with probability `p`.
    pub fn random_gnp(m: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("probability", "must lie in [0,1]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::new();
        for s in 0..m {
            for t in s + 1..m {
                if rng.gen::<f64>() < p {
                    pairs.push((s, t));
                }
            }
        }
        CommGraph::new(m, &pairs)
    }

    pub fn vertex_count(&self) -> usize {
        self.m
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn arc(&self, i: usize) -> (usize, usize) {
        self.arcs[i]
    }

    pub fn arc_index(&self, s: usize, t: usize) -> Option<usize> {
        let key = (s.min(t), s.max(t));
        self.arcs.binary_search(&key).ok()
    }

    pub fn full_index_set(&self) -> IndexSet {
        IndexSet::full(self.arc_count())
    }

    /// Arc indices incident to vertex `v`, ascending.
    pub fn incident_arcs(&self, v: usize) -> Vec<usize> {
        self.arcs
            .iter()
            .enumerate()
            .filter(|(_, &(s, t))| s == v || t == v)
            .map(|(i, _)| i)
            .collect()
    }

    /// Outgoing arcs of `v` (arcs whose tail is `v`), ascending.
    pub fn outgoing_arcs(&self, v: usize) -> Vec<usize> {
        self.arcs
            .iter()
            .enumerate()
            .filter(|(_, &(s, _))| s == v)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn degree(&self, v: usize, set: &IndexSet) -> usize {
        set.iter()
            .filter(|&i| {
                let (s, t) = self.arcs[i];
                s == v || t == v
            })
            .count()
    }

    /// Maximal vertex degree of the active subgraph; 0 for the empty set.
    pub fn max_degree(&self, set: &IndexSet) -> usize {
        (0..self.m).map(|v| self.degree(v, set)).max().unwrap_or(0)
    }

    /// Whether the active arcs connect all `m` vertices.
    pub fn is_connected(&self, set: &IndexSet) -> bool {
        let mut uf = UnionFind::new(self.m);
        for i in set.iter() {
            let (s, t) = self.arcs[i];
            uf.union(s, t);
        }
        uf.component_count() == 1
    }

    /// Graph Laplacian of the active subgraph: diagonal holds vertex
    /// degrees, off-diagonal entries are -1 per active edge.
    pub fn kirchhoff(&self, set: &IndexSet) -> DenseMatrix {
        let mut h = DenseMatrix::zeros(self.m, self.m);
        for i in set.iter() {
            let (s, t) = self.arcs[i];
            h.set(s, s, h.get(s, s) + 1.0);
            h.set(t, t, h.get(t, t) + 1.0);
            h.set(s, t, h.get(s, t) - 1.0);
            h.set(t, s, h.get(t, s) - 1.0);
        }
        h
    }

    /// Arcs of a spanning tree (first spanning arcs in index order), or
    /// `None` when the graph is disconnected.
    pub fn spanning_tree(&self) -> Option<IndexSet> {
        let mut uf = UnionFind::new(self.m);
        let mut members = Vec::new();
        for (i, &(s, t)) in self.arcs.iter().enumerate() {
            if uf.union(s, t) {
                members.push(i);
            }
        }
        if uf.component_count() == 1 {
            Some(IndexSet::new(self.arc_count(), members).expect("tree arcs in range"))
        } else {
            None
        }
    }
}

/// The rule producing the active arc set `I_k` at iteration `k`.
#[derive(Debug, Clone)]
pub enum ScheduleKind {
    Static(IndexSet),
    Cyclic(Vec<IndexSet>),
    RandomWithCore {
        core: IndexSet,
        extra_probability: f64,
        seed: u64,
    },
    /// Scripted sets; the last element repeats once the script runs out.
    Adversarial(Vec<IndexSet>),
}

#[derive(Debug, Clone)]
pub struct TopologySchedule {
    kind: ScheduleKind,
    graph: CommGraph,
}

impl TopologySchedule {
    pub fn new(graph: CommGraph, kind: ScheduleKind) -> Result<Self> {
        let l = graph.arc_count();
        let check = |set: &IndexSet, field: &str| -> Result<()> {
            if set.universe_size() != l {
                return Err(Error::invalid(
                    field,
                    format!(
                        "index set universe {} does not match arc count {l}",
                        set.universe_size()
                    ),
                ));
            }
            Ok(())
        };
        match &kind {
            ScheduleKind::Static(set) => check(set, "schedule.static")?,
            ScheduleKind::Cyclic(sets) | ScheduleKind::Adversarial(sets) => {
                if sets.is_empty() {
                    return Err(Error::invalid("schedule.sets", "must be nonempty"));
                }
                for set in sets {
                    check(set, "schedule.sets")?;
                }
            }
            ScheduleKind::RandomWithCore {
                core,
                extra_probability,
                ..
            } => {
                check(core, "schedule.core")?;
                if !(0.0..=1.0).contains(extra_probability) {
                    return Err(Error::invalid(
                        "schedule.extra_probability",
                        "must lie in [0,1]",
                    ));
                }
            }
        }
        Ok(TopologySchedule { kind, graph })
    }

    pub fn static_full(graph: CommGraph) -> Self {
        let set = graph.full_index_set();
        TopologySchedule::new(graph, ScheduleKind::Static(set)).expect("full set is valid")
    }

    pub fn graph(&self) -> &CommGraph {
        &self.graph
    }

    /// Active arc set for iteration `k` (`k >= 1`). Random-access:
    /// evaluating any `k` in any order yields the same sequence.
    pub fn next(&self, k: usize) -> IndexSet {
        debug_assert!(k >= 1, "iterations are numbered from 1");
        let l = self.graph.arc_count();
        match &self.kind {
            ScheduleKind::Static(set) => set.clone(),
            ScheduleKind::Cyclic(sets) => sets[(k - 1) % sets.len()].clone(),
            ScheduleKind::Adversarial(sets) => sets[(k - 1).min(sets.len() - 1)].clone(),
            ScheduleKind::RandomWithCore {
                core,
                extra_probability,
                seed,
            } => {
                // Counter-based draw keyed by (seed, k): random-access and
                // reproducible.
                let mut key = [0u8; 32];
                key[..8].copy_from_slice(&seed.to_le_bytes());
                key[8..16].copy_from_slice(&(k as u64).to_le_bytes());
                let mut rng = ChaCha8Rng::from_seed(key);
                let mut members: Vec<usize> = core.members().to_vec();
                for arc in 0..l {
                    if core.contains(arc) {
                        continue;
                    }
                    if rng.gen::<f64>() < *extra_probability {
                        members.push(arc);
                    }
                }
                IndexSet::new(l, members).expect("arcs in range")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kirchhoff_single_edge() {
        let g = CommGraph::new(2, &[(0, 1)]).unwrap();
        let h = g.kirchhoff(&g.full_index_set());
        assert_eq!(
            (h.get(0, 0), h.get(0, 1), h.get(1, 0), h.get(1, 1)),
            (1.0, -1.0, -1.0, 1.0)
        );
    }

    #[test]
    fn kirchhoff_triangle() {
        let g = CommGraph::complete(3);
        let h = g.kirchhoff(&g.full_index_set());
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { 2.0 } else { -1.0 };
                assert_eq!(h.get(r, c), expect);
            }
        }
    }

    #[test]
    fn kirchhoff_empty_set() {
        let g = CommGraph::complete(3);
        let h = g.kirchhoff(&IndexSet::empty(3));
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(h.get(r, c), 0.0);
            }
        }
    }

    #[test]
    fn max_degree_examples() {
        let triangle = CommGraph::complete(3);
        assert_eq!(triangle.max_degree(&triangle.full_index_set()), 2);
        let star = CommGraph::star(4);
        assert_eq!(star.max_degree(&star.full_index_set()), 3);
        let path = CommGraph::path(3);
        assert_eq!(path.max_degree(&path.full_index_set()), 2);
        assert_eq!(path.max_degree(&IndexSet::empty(2)), 0);
    }

    #[test]
    fn connectivity_examples() {
        let g = CommGraph::complete(3);
        let tree = g.spanning_tree().unwrap();
        assert!(g.is_connected(&tree));
        assert!(!g.is_connected(&IndexSet::empty(3)));

        let g4 = CommGraph::new(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!g4.is_connected(&g4.full_index_set()));
        assert!(g4.spanning_tree().is_none());
    }

    #[test]
    fn schedule_static_and_cyclic() {
        let g = CommGraph::complete(3);
        let a = IndexSet::new(3, vec![0, 1]).unwrap();
        let b = IndexSet::new(3, vec![0, 2]).unwrap();
        let s = TopologySchedule::new(g.clone(), ScheduleKind::Static(a.clone())).unwrap();
        assert_eq!(s.next(7), a);
        let c =
            TopologySchedule::new(g, ScheduleKind::Cyclic(vec![a.clone(), b.clone()])).unwrap();
        assert_eq!(c.next(1), a);
        assert_eq!(c.next(2), b);
        assert_eq!(c.next(3), a);
    }

    #[test]
    fn schedule_adversarial_repeats_last() {
        let g = CommGraph::complete(3);
        let a = IndexSet::new(3, vec![0]).unwrap();
        let b = IndexSet::new(3, vec![1]).unwrap();
        let s =
            TopologySchedule::new(g, ScheduleKind::Adversarial(vec![a.clone(), b.clone()]))
                .unwrap();
        assert_eq!(s.next(1), a);
        assert_eq!(s.next(2), b);
        assert_eq!(s.next(50), b);
    }

    #[test]
    fn schedule_random_core_zero_probability() {
        let g = CommGraph::complete(4);
        let core = IndexSet::new(g.arc_count(), vec![0, 3]).unwrap();
        let s = TopologySchedule::new(
            g,
            ScheduleKind::RandomWithCore {
                core: core.clone(),
                extra_probability: 0.0,
                seed: 11,
            },
        )
        .unwrap();
        for k in 1..20 {
            assert_eq!(s.next(k), core);
        }
    }

    #[test]
    fn schedule_random_core_is_superset_and_deterministic() {
        let g = CommGraph::complete(5);
        let core = g.spanning_tree().unwrap();
        let mk = |seed| {
            TopologySchedule::new(
                g.clone(),
                ScheduleKind::RandomWithCore {
                    core: core.clone(),
                    extra_probability: 0.4,
                    seed,
                },
            )
            .unwrap()
        };
        let (s1, s2) = (mk(42), mk(42));
        for k in 1..200 {
            let set = s1.next(k);
            assert!(core.is_subset_of(&set));
            assert_eq!(set, s2.next(k));
        }
        // different seeds eventually diverge
        let other = mk(43);
        assert!((1..200).any(|k| s1.next(k) != other.next(k)));
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(CommGraph::new(3, &[(0, 0)]).is_err());
        assert!(CommGraph::new(3, &[(0, 5)]).is_err());
        assert!(CommGraph::new(3, &[(0, 1), (1, 0)]).is_err());
    }
}
