//! Objective and feasible-set oracles, the proximal subproblem solver,
//! Lagrangian and saddle-point residuals, and a built-in problem library.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{ArcConstraintSystem, BlockVector, DualVector, IndexSet};
use crate::topology::CommGraph;

/// Penalty exponent `p` in `(1/p) max{h(v), 0}^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyPower {
    Linear,    // p = 1
    Quadratic, // p = 2
}

/// Per-block convex objective with an exact proximal map.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockObjective {
    /// `0.5 * weight * ||v - center||^2`, weight >= 0.
    Quadratic { weight: f64, center: Vec<f64> },
    /// `(1/p) max{<gradient, v> - offset, 0}^p` for an affine level function.
    Penalty {
        gradient: Vec<f64>,
        offset: f64,
        power: PenaltyPower,
    },
}

impl BlockObjective {
    pub fn value(&self, v: &[f64]) -> f64 {
        match self {
            BlockObjective::Quadratic { weight, center } => {
                0.5 * weight
                    * v.iter()
                        .zip(center.iter())
                        .map(|(a, c)| (a - c) * (a - c))
                        .sum::<f64>()
            }
            BlockObjective::Penalty {
                gradient,
                offset,
                power,
            } => {
                let h: f64 =
                    gradient.iter().zip(v.iter()).map(|(g, x)| g * x).sum::<f64>() - offset;
                let plus = h.max(0.0);
                match power {
                    PenaltyPower::Linear => plus,
                    PenaltyPower::Quadratic => 0.5 * plus * plus,
                }
            }
        }
    }
}

/// Per-block feasible set with an exact projection.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    WholeSpace,
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl FeasibleSet {
    pub fn validated_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::invalid("box", "lower/upper length mismatch"));
        }
        if lower.iter().zip(upper.iter()).any(|(lo, hi)| lo > hi) {
            return Err(Error::invalid("box", "lower bound exceeds upper bound"));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    pub fn project(&self, v: &mut [f64]) {
        if let FeasibleSet::Box { lower, upper } = self {
            for j in 0..v.len() {
                v[j] = v[j].clamp(lower[j], upper[j]);
            }
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, FeasibleSet::WholeSpace)
    }
}

/// Joint objective oracle.
#[derive(Clone)]
pub enum ObjectiveKind {
    /// `f(x) = Σ_i f_i(x_i)` with a closed-form prox per block.
    Separable(Vec<BlockObjective>),
    /// Value/gradient oracle with a known Lipschitz gradient constant;
    /// the prox falls back to a projected-gradient inner loop.
    GenericSmooth {
        value: Arc<dyn Fn(&BlockVector) -> f64 + Send + Sync>,
        gradient: Arc<dyn Fn(&BlockVector) -> BlockVector + Send + Sync>,
        lipschitz: f64,
    },
}

impl fmt::Debug for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveKind::Separable(blocks) => {
                f.debug_tuple("Separable").field(blocks).finish()
            }
            ObjectiveKind::GenericSmooth { lipschitz, .. } => f
                .debug_struct("GenericSmooth")
                .field("lipschitz", lipschitz)
                .finish(),
        }
    }
}

/// A known saddle point used for diagnostics.
#[derive(Debug, Clone)]
pub struct Reference {
    pub x: BlockVector,
    pub y: DualVector,
}

/// A problem instance: objective, Cartesian feasible set, and the arc
/// constraint system it is coupled through.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    m: usize,
    n: usize,
    pub objective: ObjectiveKind,
    pub feasible: Vec<FeasibleSet>,
    pub constraints: ArcConstraintSystem,
    pub reference: Option<Reference>,
}

/// Cap for the projected-gradient inner loop.
const INNER_CAP: usize = 10_000;

/// Exact prox of one separable block over its feasible set:
/// minimizes `f_i(v) + <lin, v> + (1/(2λ)) ||v - u||^2`.
pub(crate) fn prox_block(
    obj: &BlockObjective,
    set: &FeasibleSet,
    lin: &[f64],
    u: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    match obj {
        BlockObjective::Quadratic { weight, center } => {
            // Coordinate-wise closed form; the clamp stays exact because
            // the quadratic is diagonal.
            let denom = weight + 1.0 / lambda;
            let mut v: Vec<f64> = (0..u.len())
                .map(|j| (u[j] / lambda + weight * center[j] - lin[j]) / denom)
                .collect();
            set.project(&mut v);
            Ok(v)
        }
        BlockObjective::Penalty {
            gradient,
            offset,
            power,
        } => {
            if !set.is_whole_space() {
                return Err(Error::Unsupported(
                    "penalty objective prox requires a whole-space feasible set".into(),
                ));
            }
            // Shift the linear term into the proximal center, then solve
            // the one-dimensional prox along the penalty gradient.
            let w: Vec<f64> = (0..u.len()).map(|j| u[j] - lambda * lin[j]).collect();
            let gamma: f64 = gradient.iter().map(|g| g * g).sum();
            if gamma == 0.0 {
                return Ok(w);
            }
            let q: f64 =
                gradient.iter().zip(w.iter()).map(|(g, x)| g * x).sum::<f64>() - offset;
            let coeff = match power {
                PenaltyPower::Linear => {
                    if q <= 0.0 {
                        0.0
                    } else if q >= lambda * gamma {
                        lambda
                    } else {
                        q / gamma
                    }
                }
                PenaltyPower::Quadratic => {
                    if q <= 0.0 {
                        0.0
                    } else {
                        lambda * q / (1.0 + lambda * gamma)
                    }
                }
            };
            Ok((0..w.len()).map(|j| w[j] - coeff * gradient[j]).collect())
        }
    }
}

impl ProblemInstance {
    pub fn new(
        objective: ObjectiveKind,
        feasible: Vec<FeasibleSet>,
        constraints: ArcConstraintSystem,
        reference: Option<Reference>,
    ) -> Result<Self> {
        let m = constraints.block_count();
        let n = constraints.block_dim();
        if feasible.len() != m {
            return Err(Error::DimensionMismatch {
                axis: "feasible set block count",
                expected: m,
                actual: feasible.len(),
            });
        }
        if let ObjectiveKind::Separable(blocks) = &objective {
            if blocks.len() != m {
                return Err(Error::DimensionMismatch {
                    axis: "objective block count",
                    expected: m,
                    actual: blocks.len(),
                });
            }
            for (i, b) in blocks.iter().enumerate() {
                let dim = match b {
                    BlockObjective::Quadratic { weight, center } => {
                        if *weight < 0.0 {
                            return Err(Error::invalid(
                                format!("objective[{i}].weight"),
                                "must be nonnegative",
                            ));
                        }
                        center.len()
                    }
                    BlockObjective::Penalty { gradient, .. } => gradient.len(),
                };
                if dim != n {
                    return Err(Error::DimensionMismatch {
                        axis: "objective block dimension",
                        expected: n,
                        actual: dim,
                    });
                }
            }
        }
        for (i, set) in feasible.iter().enumerate() {
            if let FeasibleSet::Box { lower, upper } = set {
                if lower.len() != n || upper.len() != n {
                    return Err(Error::DimensionMismatch {
                        axis: "box dimension",
                        expected: n,
                        actual: lower.len().max(upper.len()),
                    });
                }
                if lower.iter().zip(upper.iter()).any(|(lo, hi)| lo > hi) {
                    return Err(Error::invalid(
                        format!("feasible[{i}]"),
                        "lower bound exceeds upper bound",
                    ));
                }
            }
        }
        Ok(ProblemInstance {
            m,
            n,
            objective,
            feasible,
            constraints,
            reference,
        })
    }

    pub fn block_count(&self) -> usize {
        self.m
    }

    pub fn block_dim(&self) -> usize {
        self.n
    }

    /// `f(x)`.
    pub fn objective_value(&self, x: &BlockVector) -> f64 {
        debug_assert_eq!(x.block_count(), self.m);
        match &self.objective {
            ObjectiveKind::Separable(blocks) => (0..self.m)
                .map(|i| blocks[i].value(x.block(i)))
                .sum(),
            ObjectiveKind::GenericSmooth { value, .. } => value(x),
        }
    }

    /// Projection of `x` onto the Cartesian feasible set `X`.
    pub fn project_feasible(&self, x: &BlockVector) -> BlockVector {
        let mut out = x.clone();
        for i in 0..self.m {
            self.feasible[i].project(out.block_mut(i));
        }
        out
    }

    /// Minimizer over `X` of `f(x) + <linear, x> + (1/(2λ)) ||x - u||^2`.
    ///
    /// Separable kinds use exact closed forms; `GenericSmooth` runs a
    /// projected-gradient inner loop to gradient-mapping norm `tol`.
    pub fn prox_primal(
        &self,
        linear: &BlockVector,
        u: &BlockVector,
        lambda: f64,
        tol: f64,
    ) -> Result<BlockVector> {
        if !(lambda > 0.0) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        linear.check_shape(self.m, self.n, "linear term")?;
        u.check_shape(self.m, self.n, "proximal center u")?;
        match &self.objective {
            ObjectiveKind::Separable(blocks) => {
                let mut out = BlockVector::zeros(self.m, self.n);
                for i in 0..self.m {
                    let v = prox_block(
                        &blocks[i],
                        &self.feasible[i],
                        linear.block(i),
                        u.block(i),
                        lambda,
                    )?;
                    out.block_mut(i).copy_from_slice(&v);
                }
                Ok(out)
            }
            ObjectiveKind::GenericSmooth {
                gradient,
                lipschitz,
                ..
            } => {
                let step = 1.0 / (lipschitz + 1.0 / lambda);
                let mut x = self.project_feasible(u);
                let mut residual = f64::INFINITY;
                for _ in 0..INNER_CAP {
                    let mut g = gradient(&x);
                    g.axpy(1.0, linear);
                    let mut diff = x.sub(u);
                    diff.scale(1.0 / lambda);
                    g.axpy(1.0, &diff);
                    let mut candidate = x.clone();
                    candidate.axpy(-step, &g);
                    let candidate = self.project_feasible(&candidate);
                    residual = x.sub(&candidate).norm() / step;
                    x = candidate;
                    if residual <= tol {
                        return Ok(x);
                    }
                }
                Err(Error::ProxDidNotConverge {
                    iterations: INNER_CAP,
                    residual,
                    best: Box::new(x),
                })
            }
        }
    }

    /// `L(x, y) = f(x) + <y, A x - b>` over the full arc set; inactive
    /// dual blocks contribute zero.
    pub fn lagrangian(&self, x: &BlockVector, y: &DualVector) -> Result<f64> {
        x.check_shape(self.m, self.n, "primal vector x")?;
        let l = self.constraints.arc_count();
        let full = IndexSet::full(l);
        let ax = self.constraints.apply(&full, x)?;
        let mut coupling = 0.0;
        for i in y.active().iter() {
            let yi = y.get(i).expect("active block present");
            let a = ax.block(i);
            let b = self.constraints.rhs_block(i);
            for j in 0..self.n {
                coupling += yi[j] * (a[j] - b[j]);
            }
        }
        Ok(self.objective_value(x) + coupling)
    }

    /// Saddle-point residual for the problem restricted to `I`:
    /// `(‖A_I x - b_I‖, ‖x - prox(x; A^T y, λ=1)‖)`. Both vanish iff
    /// `(x, y)` is a saddle point of the restricted problem.
    pub fn saddle_residual(
        &self,
        set: &IndexSet,
        x: &BlockVector,
        y: &DualVector,
        tol: f64,
    ) -> Result<(f64, f64)> {
        let primal_feas = self.constraints.residual_norm(set, x)?;
        let full = IndexSet::full(self.constraints.arc_count());
        let linear = self.constraints.apply_transpose(&full, y)?;
        let fixed_point = self.prox_primal(&linear, x, 1.0, tol)?;
        let stationarity = x.sub(&fixed_point).norm();
        Ok((primal_feas, stationarity))
    }

    // ---- built-in problem library ------------------------------------

    /// Consensus of quadratics: `f_i(v) = 0.5 ||v - c_i||^2`, consensus
    /// constraints over the graph arcs. With whole-space blocks and a
    /// connected graph the reference solution (coordinate-wise mean, plus
    /// duals solved on a spanning tree) is filled in automatically.
    pub fn quadratic_consensus(
        graph: &CommGraph,
        n: usize,
        centers: Vec<Vec<f64>>,
        boxes: Option<Vec<FeasibleSet>>,
    ) -> Result<Self> {
        let m = graph.vertex_count();
        if centers.len() != m {
            return Err(Error::DimensionMismatch {
                axis: "centers",
                expected: m,
                actual: centers.len(),
            });
        }
        let constraints = ArcConstraintSystem::consensus(m, n, graph.arcs())?;
        let blocks: Vec<BlockObjective> = centers
            .iter()
            .map(|c| BlockObjective::Quadratic {
                weight: 1.0,
                center: c.clone(),
            })
            .collect();
        let feasible = match boxes {
            Some(f) => f,
            None => vec![FeasibleSet::WholeSpace; m],
        };
        let whole_space = feasible.iter().all(FeasibleSet::is_whole_space);
        let reference = if whole_space {
            graph.spanning_tree().map(|tree| {
                let mut mean = vec![0.0; n];
                for c in &centers {
                    for j in 0..n {
                        mean[j] += c[j];
                    }
                }
                for v in &mut mean {
                    *v /= m as f64;
                }
                let x = BlockVector::from_blocks(&vec![mean.clone(); m])
                    .expect("uniform blocks");
                // Stationarity requires (A^T y)_i = -(x*_i - c_i); solve the
                // tree system exactly by peeling leaves.
                let mut targets = BlockVector::zeros(m, n);
                for i in 0..m {
                    let block = targets.block_mut(i);
                    for j in 0..n {
                        block[j] = centers[i][j] - mean[j];
                    }
                }
                let y = tree_dual(graph, &tree, &targets);
                Reference { x, y }
            })
        } else {
            None
        };
        ProblemInstance::new(
            ObjectiveKind::Separable(blocks),
            feasible,
            constraints,
            reference,
        )
    }

    /// Penalized feasibility: agent `i` holds the halfspace
    /// `<g_i, v> <= h_i` and pays `(1/p) max{<g_i, v> - h_i, 0}^p`.
    /// With a known common feasible point the reference saddle point
    /// `(x̄, 0)` is valid for every active set.
    pub fn penalized_feasibility(
        graph: &CommGraph,
        n: usize,
        halfspaces: Vec<(Vec<f64>, f64)>,
        power: PenaltyPower,
        feasible_point: Option<Vec<f64>>,
    ) -> Result<Self> {
        let m = graph.vertex_count();
        if halfspaces.len() != m {
            return Err(Error::DimensionMismatch {
                axis: "halfspaces",
                expected: m,
                actual: halfspaces.len(),
            });
        }
        if let Some(point) = &feasible_point {
            if point.len() != n {
                return Err(Error::DimensionMismatch {
                    axis: "feasible_point",
                    expected: n,
                    actual: point.len(),
                });
            }
            for (i, (g, h)) in halfspaces.iter().enumerate() {
                let val: f64 =
                    g.iter().zip(point.iter()).map(|(a, b)| a * b).sum::<f64>() - h;
                if val > 1e-12 {
                    return Err(Error::invalid(
                        format!("feasible_point (halfspace {i})"),
                        format!("violates the constraint by {val:.3e}"),
                    ));
                }
            }
        }
        let constraints = ArcConstraintSystem::consensus(m, n, graph.arcs())?;
        let blocks: Vec<BlockObjective> = halfspaces
            .into_iter()
            .map(|(gradient, offset)| BlockObjective::Penalty {
                gradient,
                offset,
                power,
            })
            .collect();
        let reference = feasible_point.map(|p| Reference {
            x: BlockVector::from_blocks(&vec![p; m]).expect("uniform blocks"),
            y: DualVector::zero(graph.arc_count(), n),
        });
        ProblemInstance::new(
            ObjectiveKind::Separable(blocks),
            vec![FeasibleSet::WholeSpace; m],
            constraints,
            reference,
        )
    }

    /// Per-block quadratics with box constraints coupled by consensus.
    pub fn constrained_least_squares(
        graph: &CommGraph,
        n: usize,
        weights: Vec<f64>,
        centers: Vec<Vec<f64>>,
        boxes: Vec<FeasibleSet>,
    ) -> Result<Self> {
        let m = graph.vertex_count();
        if centers.len() != m || weights.len() != m {
            return Err(Error::DimensionMismatch {
                axis: "centers/weights",
                expected: m,
                actual: centers.len().min(weights.len()),
            });
        }
        let constraints = ArcConstraintSystem::consensus(m, n, graph.arcs())?;
        let blocks: Vec<BlockObjective> = weights
            .into_iter()
            .zip(centers)
            .map(|(weight, center)| BlockObjective::Quadratic { weight, center })
            .collect();
        ProblemInstance::new(ObjectiveKind::Separable(blocks), boxes, constraints, None)
    }
}

/// Solve `A_tree^T y = g` for duals supported on a spanning tree by
/// peeling leaves; exact up to rounding. `g` must sum to zero over blocks.
pub fn tree_dual(graph: &CommGraph, tree: &IndexSet, targets: &BlockVector) -> DualVector {
    let m = graph.vertex_count();
    let n = targets.block_dim();
    let mut residual: Vec<Vec<f64>> = (0..m).map(|v| targets.block(v).to_vec()).collect();
    let mut remaining: Vec<Vec<usize>> = vec![Vec::new(); m]; // incident tree arcs
    for i in tree.iter() {
        let (s, t) = graph.arc(i);
        remaining[s].push(i);
        remaining[t].push(i);
    }
    let mut solved: Vec<Option<Vec<f64>>> = vec![None; graph.arc_count()];
    let mut leaves: Vec<usize> = (0..m).filter(|&v| remaining[v].len() == 1).collect();
    while let Some(v) = leaves.pop() {
        let Some(&arc) = remaining[v].first() else {
            continue;
        };
        let (s, t) = graph.arc(arc);
        let y: Vec<f64> = if v == s {
            residual[v].clone()
        } else {
            residual[v].iter().map(|r| -r).collect()
        };
        let other = if v == s { t } else { s };
        // move the solved arc's contribution to the other endpoint's RHS
        let sign = if other == s { 1.0 } else { -1.0 };
        for j in 0..n {
            residual[other][j] -= sign * y[j];
        }
        solved[arc] = Some(y);
        remaining[v].clear();
        remaining[other].retain(|&a| a != arc);
        if remaining[other].len() == 1 {
            leaves.push(other);
        }
    }
    let active: Vec<usize> = tree.iter().collect();
    let mut values = Vec::with_capacity(active.len() * n);
    for &i in &active {
        values.extend_from_slice(solved[i].as_deref().unwrap_or(&vec![0.0; n]));
    }
    DualVector::new(
        IndexSet::new(graph.arc_count(), active).expect("tree arcs in range"),
        n,
        values,
    )
    .expect("consistent dual layout")
}
