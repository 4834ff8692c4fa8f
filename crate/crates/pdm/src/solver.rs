//! The centralized primal-dual iteration: dual pre-step, primal proximal
//! step, dual correction. Includes the stepsize policy, stopping rules,
//! iteration traces, and a Fejér-monotonicity monitor.

use crate::error::{Error, Result};
use crate::linalg::{ArcConstraintSystem, BlockVector, DualVector, IndexSet};
use crate::problem::ProblemInstance;
use crate::topology::TopologySchedule;

/// Default relative tolerance for the operator-norm estimate used by the
/// per-iteration stepsize rule.
pub const NORM_TOL: f64 = 1e-10;

/// How λ_k is selected inside the admissible interval. All modes take the
/// largest provably safe value.
#[derive(Debug, Clone, PartialEq)]
pub enum StepsizeMode {
    /// λ = sqrt(1-τ) / (sqrt(2) ‖A_I‖), recomputed per active set.
    PerIterationNorm,
    /// λ = 0.5 sqrt((1-τ)/v) for a fixed bound v on the maximal vertex
    /// degree of any active topology.
    FixedUpperBound { max_degree: usize },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepsizePolicy {
    pub tau: f64,
    pub mode: StepsizeMode,
}

impl StepsizePolicy {
    pub fn new(tau: f64, mode: StepsizeMode) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid("tau", "must lie in (0,1)"));
        }
        if let StepsizeMode::Constant { value } = mode {
            if !(value > 0.0) {
                return Err(Error::invalid("stepsize.value", "must be positive"));
            }
        }
        if let StepsizeMode::FixedUpperBound { max_degree } = mode {
            if max_degree == 0 {
                return Err(Error::invalid("stepsize.max_degree", "must be >= 1"));
            }
        }
        Ok(StepsizePolicy { tau, mode })
    }

    /// λ_k for the active set `I`. The empty set carries no dual motion,
    /// so it returns the τ floor.
    pub fn stepsize(&self, sys: &ArcConstraintSystem, set: &IndexSet) -> Result<f64> {
        if set.is_empty() {
            return Ok(self.tau);
        }
        let upper = match &self.mode {
            StepsizeMode::PerIterationNorm => {
                let norm = sys.operator_norm(set, NORM_TOL)?;
                (1.0 - self.tau).sqrt() / (2.0f64.sqrt() * norm)
            }
            StepsizeMode::FixedUpperBound { max_degree } => {
                0.5 * ((1.0 - self.tau) / *max_degree as f64).sqrt()
            }
            StepsizeMode::Constant { value } => return Ok(*value),
        };
        if upper < self.tau {
            return Err(Error::EmptyStepsizeInterval {
                tau: self.tau,
                upper,
            });
        }
        Ok(upper)
    }
}

/// Solver state after iteration `k`.
#[derive(Debug, Clone)]
pub struct PdmState {
    pub k: usize,
    pub x: BlockVector,
    pub y: DualVector,
    /// The dual pre-step p^k (diagnostic).
    pub p_last: DualVector,
    pub active: IndexSet,
    pub lambda: f64,
}

impl PdmState {
    pub fn initial(prob: &ProblemInstance, x0: &BlockVector) -> Result<Self> {
        x0.check_shape(prob.block_count(), prob.block_dim(), "initial point x0")?;
        let l = prob.constraints.arc_count();
        let n = prob.block_dim();
        Ok(PdmState {
            k: 0,
            x: prob.project_feasible(x0),
            y: DualVector::zero(l, n),
            p_last: DualVector::zero(l, n),
            active: IndexSet::empty(l),
            lambda: 0.0,
        })
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    pub lambda: f64,
    pub objective: f64,
    /// ‖A_{I_k} x^k − b_{I_k}‖
    pub primal_residual: f64,
    /// ‖A_L x^k − b_L‖
    pub full_residual: f64,
    /// ‖x^k − x^{k−1}‖
    pub step_norm: f64,
    /// ‖p^k − y^k‖
    pub p_minus_y: f64,
    /// ‖p^k − y^{k−1}‖
    pub p_minus_y_prev: f64,
    /// ‖w^k − w*‖ when a reference saddle point is known.
    pub dist_to_ref: Option<f64>,
    pub active_count: usize,
}

/// One iteration: dual pre-step, primal prox, dual correction.
///
/// The dual pre-update reads y^{k−1} as a full-length vector whose
/// inactive blocks are zero, so an arc re-entering the active set
/// restarts from 0.
pub fn pdm_step(
    prob: &ProblemInstance,
    state: &PdmState,
    next_active: &IndexSet,
    lambda: f64,
    tol: f64,
) -> Result<PdmState> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", "must be positive"));
    }
    let sys = &prob.constraints;
    let n = prob.block_dim();

    let p = dual_update(sys, next_active, &state.y, &state.x, lambda)?;
    let linear = sys.apply_transpose(next_active, &p)?;
    let x = prob.prox_primal(&linear, &state.x, lambda, tol)?;
    let y = dual_update(sys, next_active, &state.y, &x, lambda)?;

    debug_assert_eq!(p.block_dim(), n);
    Ok(PdmState {
        k: state.k + 1,
        x,
        y,
        p_last: p,
        active: next_active.clone(),
        lambda,
    })
}

/// π_{Y_I}[y + λ (A x − b)] computed blockwise on the active arcs.
fn dual_update(
    sys: &ArcConstraintSystem,
    set: &IndexSet,
    y: &DualVector,
    x: &BlockVector,
    lambda: f64,
) -> Result<DualVector> {
    let n = sys.block_dim();
    let ax = sys.apply(set, x)?;
    let zeros = vec![0.0; n];
    let mut values = Vec::with_capacity(set.len() * n);
    for i in set.iter() {
        let yi = y.get(i).unwrap_or(&zeros);
        let a = ax.block(i);
        let b = sys.rhs_block(i);
        for j in 0..n {
            values.push(yi[j] + lambda * (a[j] - b[j]));
        }
    }
    DualVector::new(set.clone(), n, values)
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// full residual and step norm both fell below epsilon
    Converged,
    BudgetExhausted,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StoppingRule {
    pub epsilon: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule { epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: PdmState,
    pub trace: Vec<IterationRecord>,
    pub stop: StopReason,
    /// ‖w^0 − w*‖ when a reference is known; anchors the Fejér check.
    pub initial_dist_to_ref: Option<f64>,
    /// (x^k, y^k) per iteration, for equivalence checks.
    pub iterates: Vec<(BlockVector, DualVector)>,
}

pub(crate) fn distance_to_reference(
    prob: &ProblemInstance,
    x: &BlockVector,
    y: &DualVector,
) -> Option<f64> {
    prob.reference.as_ref().map(|r| {
        let dx = x.sub(&r.x).norm();
        let dy = y.diff_norm(&r.y);
        (dx * dx + dy * dy).sqrt()
    })
}

/// Diagnostics shared by the centralized and multi-agent engines so the
/// two traces are computed by identical arithmetic.
pub(crate) fn make_record(
    prob: &ProblemInstance,
    state: &PdmState,
    prev_x: &BlockVector,
    prev_y: &DualVector,
) -> Result<IterationRecord> {
    let sys = &prob.constraints;
    let full = IndexSet::full(sys.arc_count());
    Ok(IterationRecord {
        k: state.k,
        lambda: state.lambda,
        objective: prob.objective_value(&state.x),
        primal_residual: sys.residual_norm(&state.active, &state.x)?,
        full_residual: sys.residual_norm(&full, &state.x)?,
        step_norm: state.x.sub(prev_x).norm(),
        p_minus_y: state.p_last.diff_norm(&state.y),
        p_minus_y_prev: state.p_last.diff_norm(prev_y),
        dist_to_ref: distance_to_reference(prob, &state.x, &state.y),
        active_count: state.active.len(),
    })
}

/// Inner prox tolerance coupled to outer progress.
pub(crate) fn inner_tolerance(prev_step_norm: f64) -> f64 {
    (0.01 * prev_step_norm).min(1e-10)
}

/// Iterate `pdm_step` with the schedule and stepsize policy until the
/// stopping rule fires or the budget is exhausted. Deterministic given
/// the schedule's seed.
pub fn run(
    prob: &ProblemInstance,
    schedule: &TopologySchedule,
    policy: &StepsizePolicy,
    stop: &StoppingRule,
    budget: usize,
    x0: &BlockVector,
) -> Result<RunResult> {
    if budget < 1 {
        return Err(Error::invalid("budget", "must be >= 1"));
    }
    if schedule.graph().arc_count() != prob.constraints.arc_count() {
        return Err(Error::DimensionMismatch {
            axis: "schedule arc count",
            expected: prob.constraints.arc_count(),
            actual: schedule.graph().arc_count(),
        });
    }
    let mut state = PdmState::initial(prob, x0)?;
    let initial_dist = distance_to_reference(prob, &state.x, &state.y);
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut prev_step_norm = f64::INFINITY;
    let mut stop_reason = StopReason::BudgetExhausted;
    for k in 1..=budget {
        let active = schedule.next(k);
        let lambda = policy.stepsize(&prob.constraints, &active)?;
        let tol = inner_tolerance(prev_step_norm);
        let prev_x = state.x.clone();
        let prev_y = state.y.clone();
        state = pdm_step(prob, &state, &active, lambda, tol)?;
        let record = make_record(prob, &state, &prev_x, &prev_y)?;
        prev_step_norm = record.step_norm;
        let done = record.full_residual <= stop.epsilon && record.step_norm <= stop.epsilon;
        trace.push(record);
        iterates.push((state.x.clone(), state.y.clone()));
        if done {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    Ok(RunResult {
        state,
        trace,
        stop: stop_reason,
        initial_dist_to_ref: initial_dist,
        iterates,
    })
}

/// Outcome of the Fejér-monotonicity check.
#[derive(Debug, Clone)]
pub struct FejerReport {
    pub pass: bool,
    pub checked: usize,
    pub first_violation: Option<FejerViolation>,
}

#[derive(Debug, Clone)]
pub struct FejerViolation {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Verifies the per-step contraction
/// `‖w^k−w*‖² ≤ ‖w^{k−1}−w*‖² − ‖p^k−y^k‖² − ‖p^k−y^{k−1}‖² − τ‖x^k−x^{k−1}‖² + slack`.
///
/// The caller asserts that the reference saddle point lies in the saddle
/// set of every visited active topology; `warmup` skips an initial window
/// where the hypotheses may not yet hold.
pub fn check_fejer(
    result: &RunResult,
    tau: f64,
    slack: f64,
    warmup: usize,
) -> Result<FejerReport> {
    let Some(initial) = result.initial_dist_to_ref else {
        return Err(Error::MissingReference(
            "the Fejér check needs a reference saddle point; for feasibility-type \
             instances any common feasible consensus point paired with zero duals \
             is valid for every active set"
                .into(),
        ));
    };
    let mut prev_sq = initial * initial;
    let mut checked = 0;
    let mut first_violation = None;
    for rec in &result.trace {
        let Some(dist) = rec.dist_to_ref else {
            return Err(Error::MissingReference(
                "trace record lacks dist_to_ref".into(),
            ));
        };
        let lhs = dist * dist;
        let rhs = prev_sq
            - rec.p_minus_y * rec.p_minus_y
            - rec.p_minus_y_prev * rec.p_minus_y_prev
            - tau * rec.step_norm * rec.step_norm;
        if rec.k > warmup {
            checked += 1;
            if lhs > rhs + slack && first_violation.is_none() {
                first_violation = Some(FejerViolation { k: rec.k, lhs, rhs });
            }
        }
        prev_sq = lhs;
    }
    Ok(FejerReport {
        pass: first_violation.is_none(),
        checked,
        first_violation,
    })
}
