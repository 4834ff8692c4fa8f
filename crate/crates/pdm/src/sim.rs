//! Round-synchronous multi-agent realization of the primal-dual
//! iteration. Each agent owns its primal block and the dual variables of
//! its outgoing arcs; per round the agents run three report phases (dual
//! pre-step, local prox, dual correction) exchanging values only with
//! neighbors. A message ledger makes the exchanges observable.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{ArcRow, BlockVector, DualVector, IndexSet};
use crate::problem::{prox_block, BlockObjective, FeasibleSet, ObjectiveKind, ProblemInstance};
use crate::solver::{
    distance_to_reference, inner_tolerance, make_record, PdmState, RunResult, StepsizePolicy,
    StopReason, StoppingRule,
};
use crate::topology::{CommGraph, TopologySchedule};

/// Payload kinds of the three report phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    PReport,
    XReport,
    YReport,
}

impl MessageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::PReport => "p-report",
            MessageKind::XReport => "x-report",
            MessageKind::YReport => "y-report",
        }
    }
}

/// One ledger entry. Round 0 records the initial reports.
#[derive(Debug, Clone)]
pub struct Message {
    pub round: usize,
    pub phase: u8,
    pub sender: usize,
    pub receiver: usize,
    /// Arc the payload belongs to; `None` for primal broadcasts, which are
    /// per-block.
    pub arc: Option<usize>,
    pub kind: MessageKind,
    pub payload: Vec<f64>,
}

/// Per-agent state. The caches hold only values for incident arcs and
/// graph neighbors; the locality audit enforces this every round.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub x: Vec<f64>,
    /// Duals of the agent's outgoing active arcs; inactive arcs absent.
    pub duals: BTreeMap<usize, Vec<f64>>,
    /// Dual pre-steps computed this round on owned arcs.
    pub p_own: BTreeMap<usize, Vec<f64>>,
    /// Latest primal blocks received from neighbors.
    pub x_cache: BTreeMap<usize, Vec<f64>>,
    /// Latest p blocks received on incoming active arcs.
    pub p_cache: BTreeMap<usize, Vec<f64>>,
    /// Latest corrected duals received on incoming active arcs.
    pub y_cache: BTreeMap<usize, Vec<f64>>,
    pub objective: BlockObjective,
    pub feasible: FeasibleSet,
}

/// Wall-clock cost of the three phases of one or more rounds.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseTimings {
    pub phase1: Duration,
    pub phase2: Duration,
    pub phase3: Duration,
}

impl PhaseTimings {
    fn add(&mut self, other: &PhaseTimings) {
        self.phase1 += other.phase1;
        self.phase2 += other.phase2;
        self.phase3 += other.phase3;
    }
}

/// Build the per-agent states for a separable consensus problem and
/// deliver the initial primal reports (round 0 of the ledger).
pub fn init_agents(
    prob: &ProblemInstance,
    graph: &CommGraph,
    x0: &BlockVector,
) -> Result<(Vec<AgentState>, Vec<Message>)> {
    let m = prob.block_count();
    let n = prob.block_dim();
    x0.check_shape(m, n, "initial point x0")?;
    if graph.vertex_count() != m {
        return Err(Error::DimensionMismatch {
            axis: "graph vertex count",
            expected: m,
            actual: graph.vertex_count(),
        });
    }
    let ObjectiveKind::Separable(blocks) = &prob.objective else {
        return Err(Error::Unsupported(
            "the multi-agent simulator requires a separable objective".into(),
        ));
    };
    if prob.constraints.arc_count() != graph.arc_count() {
        return Err(Error::DimensionMismatch {
            axis: "constraint arc count",
            expected: graph.arc_count(),
            actual: prob.constraints.arc_count(),
        });
    }
    for i in 0..graph.arc_count() {
        let matches_graph = matches!(
            prob.constraints.row(i),
            ArcRow::Consensus { s, t } if (*s, *t) == graph.arc(i)
        );
        let zero_rhs = prob.constraints.rhs_block(i).iter().all(|&v| v == 0.0);
        if !matches_graph || !zero_rhs {
            return Err(Error::Unsupported(
                "the multi-agent simulator requires consensus constraints with b = 0 \
                 matching the communication graph"
                    .into(),
            ));
        }
    }
    let mut agents: Vec<AgentState> = (0..m)
        .map(|s| {
            let mut x = x0.block(s).to_vec();
            prob.feasible[s].project(&mut x);
            AgentState {
                id: s,
                x,
                duals: BTreeMap::new(),
                p_own: BTreeMap::new(),
                x_cache: BTreeMap::new(),
                p_cache: BTreeMap::new(),
                y_cache: BTreeMap::new(),
                objective: blocks[s].clone(),
                feasible: prob.feasible[s].clone(),
            }
        })
        .collect();
    // Initial reports: every agent announces x^0 to all graph neighbors.
    let mut messages = Vec::new();
    for i in 0..graph.arc_count() {
        let (s, t) = graph.arc(i);
        for (from, to) in [(s, t), (t, s)] {
            let payload = agents[from].x.clone();
            messages.push(Message {
                round: 0,
                phase: 0,
                sender: from,
                receiver: to,
                arc: None,
                kind: MessageKind::XReport,
                payload: payload.clone(),
            });
            agents[to].x_cache.insert(from, payload);
        }
    }
    Ok((agents, messages))
}

/// Every cached key must belong to an incident arc or a graph neighbor.
pub fn audit_locality(agents: &[AgentState], graph: &CommGraph) -> Result<()> {
    for agent in agents {
        let incident = graph.incident_arcs(agent.id);
        let outgoing = graph.outgoing_arcs(agent.id);
        for &arc in agent.duals.keys().chain(agent.p_own.keys()) {
            if !outgoing.contains(&arc) {
                return Err(Error::Protocol(format!(
                    "agent {} stores dual state for non-owned arc {arc}",
                    agent.id
                )));
            }
        }
        for &arc in agent.p_cache.keys().chain(agent.y_cache.keys()) {
            if !incident.contains(&arc) {
                return Err(Error::Protocol(format!(
                    "agent {} caches arc {arc} it is not incident to",
                    agent.id
                )));
            }
        }
        for &peer in agent.x_cache.keys() {
            if graph.arc_index(agent.id, peer).is_none() {
                return Err(Error::Protocol(format!(
                    "agent {} caches primal block of non-neighbor {peer}",
                    agent.id
                )));
            }
        }
    }
    Ok(())
}

/// Execute one round in agent order `0..m` for phase 2.
pub fn pdmi_round(
    agents: &mut [AgentState],
    graph: &CommGraph,
    prev_active: &IndexSet,
    active: &IndexSet,
    round: usize,
    lambda: f64,
    tol: f64,
) -> Result<(Vec<Message>, PhaseTimings)> {
    let order: Vec<usize> = (0..agents.len()).collect();
    pdmi_round_ordered(agents, graph, prev_active, active, round, lambda, tol, &order)
}

/// One round with an explicit phase-2 agent order. The result is
/// independent of the order: within a phase the agents are independent
/// and all reductions run in fixed arc-index order.
#[allow(clippy::too_many_arguments)]
pub fn pdmi_round_ordered(
    agents: &mut [AgentState],
    graph: &CommGraph,
    prev_active: &IndexSet,
    active: &IndexSet,
    round: usize,
    lambda: f64,
    tol: f64,
    order: &[usize],
) -> Result<(Vec<Message>, PhaseTimings)> {
    let _ = tol; // exact closed-form proxes; kept for interface symmetry
    let n = agents.first().map_or(0, |a| a.x.len());
    let mut messages = Vec::new();
    let mut timings = PhaseTimings::default();

    // Arcs leaving the active set drop their duals and cached values.
    for agent in agents.iter_mut() {
        agent.duals.retain(|arc, _| active.contains(*arc));
        agent.p_cache.retain(|arc, _| active.contains(*arc));
        agent.y_cache.retain(|arc, _| active.contains(*arc));
        agent.p_own.clear();
    }

    // ---- phase 1: refresh newly active arcs, then dual pre-steps -------
    let started = Instant::now();
    for arc in active.difference(prev_active) {
        let (s, t) = graph.arc(arc);
        for (from, to) in [(s, t), (t, s)] {
            let payload = agents[from].x.clone();
            messages.push(Message {
                round,
                phase: 1,
                sender: from,
                receiver: to,
                arc: Some(arc),
                kind: MessageKind::XReport,
                payload: payload.clone(),
            });
            agents[to].x_cache.insert(from, payload);
        }
    }
    let zeros = vec![0.0; n];
    let mut p_updates: Vec<(usize, usize, usize, Vec<f64>)> = Vec::new();
    for arc in active.iter() {
        let (s, t) = graph.arc(arc);
        let owner = &agents[s];
        let xs = &owner.x;
        let xt = owner.x_cache.get(&t).ok_or_else(|| {
            Error::Protocol(format!(
                "agent {s} has no cached primal block of neighbor {t} for active arc {arc}"
            ))
        })?;
        let y_prev = owner.duals.get(&arc).unwrap_or(&zeros);
        let p: Vec<f64> = (0..n)
            .map(|j| y_prev[j] + lambda * (xs[j] - xt[j]))
            .collect();
        p_updates.push((arc, s, t, p));
    }
    for (arc, s, t, p) in p_updates {
        messages.push(Message {
            round,
            phase: 1,
            sender: s,
            receiver: t,
            arc: Some(arc),
            kind: MessageKind::PReport,
            payload: p.clone(),
        });
        agents[t].p_cache.insert(arc, p.clone());
        agents[s].p_own.insert(arc, p);
    }
    timings.phase1 += started.elapsed();

    // ---- phase 2: aggregate, local prox, broadcast ---------------------
    let started = Instant::now();
    let mut x_updates: Vec<(usize, Vec<f64>)> = Vec::with_capacity(order.len());
    for &s in order {
        let agent = &agents[s];
        // Signed aggregate of p over incident active arcs, ascending arc
        // order: + on outgoing arcs, − on incoming.
        let mut v = vec![0.0; n];
        for arc in active.iter() {
            let (a, b) = graph.arc(arc);
            if a == s {
                let p = agent.p_own.get(&arc).ok_or_else(|| {
                    Error::Protocol(format!("agent {s} missing own p for arc {arc}"))
                })?;
                for j in 0..n {
                    v[j] += p[j];
                }
            } else if b == s {
                let p = agent.p_cache.get(&arc).ok_or_else(|| {
                    Error::Protocol(format!("agent {s} missing p-report for arc {arc}"))
                })?;
                for j in 0..n {
                    v[j] -= p[j];
                }
            }
        }
        let x_new = prox_block(&agent.objective, &agent.feasible, &v, &agent.x, lambda)
            .map_err(|e| Error::Protocol(format!("agent {s}: local prox failed: {e}")))?;
        x_updates.push((s, x_new));
    }
    x_updates.sort_by_key(|(s, _)| *s);
    for (s, x_new) in x_updates {
        agents[s].x = x_new;
    }
    let mut x_deliveries: Vec<(usize, usize, usize, Vec<f64>)> = Vec::new();
    for arc in active.iter() {
        let (s, t) = graph.arc(arc);
        for (from, to) in [(s, t), (t, s)] {
            x_deliveries.push((arc, from, to, agents[from].x.clone()));
        }
    }
    for (arc, from, to, payload) in x_deliveries {
        messages.push(Message {
            round,
            phase: 2,
            sender: from,
            receiver: to,
            arc: Some(arc),
            kind: MessageKind::XReport,
            payload: payload.clone(),
        });
        agents[to].x_cache.insert(from, payload);
    }
    timings.phase2 += started.elapsed();

    // ---- phase 3: dual corrections -------------------------------------
    let started = Instant::now();
    let mut y_updates: Vec<(usize, usize, usize, Vec<f64>)> = Vec::new();
    for arc in active.iter() {
        let (s, t) = graph.arc(arc);
        let owner = &agents[s];
        let xs = &owner.x;
        let xt = owner.x_cache.get(&t).ok_or_else(|| {
            Error::Protocol(format!(
                "agent {s} has no refreshed primal block of {t} for arc {arc}"
            ))
        })?;
        let y_prev = owner.duals.get(&arc).unwrap_or(&zeros);
        let y: Vec<f64> = (0..n)
            .map(|j| y_prev[j] + lambda * (xs[j] - xt[j]))
            .collect();
        y_updates.push((arc, s, t, y));
    }
    for (arc, s, t, y) in y_updates {
        messages.push(Message {
            round,
            phase: 3,
            sender: s,
            receiver: t,
            arc: Some(arc),
            kind: MessageKind::YReport,
            payload: y.clone(),
        });
        agents[t].y_cache.insert(arc, y.clone());
        agents[s].duals.insert(arc, y);
    }
    timings.phase3 += started.elapsed();

    audit_locality(agents, graph)?;
    Ok((messages, timings))
}

/// Assemble the primal iterate from the agents.
pub fn assemble_x(agents: &[AgentState], n: usize) -> BlockVector {
    let blocks: Vec<Vec<f64>> = agents.iter().map(|a| a.x.clone()).collect();
    let _ = n;
    BlockVector::from_blocks(&blocks).expect("agents hold uniform blocks")
}

/// Assemble a dual vector from owned per-agent maps, ascending arc order.
fn assemble_dual(
    agents: &[AgentState],
    graph: &CommGraph,
    n: usize,
    pick: impl Fn(&AgentState) -> &BTreeMap<usize, Vec<f64>>,
) -> DualVector {
    let l = graph.arc_count();
    let mut members = Vec::new();
    let mut values = Vec::new();
    for arc in 0..l {
        let (s, _) = graph.arc(arc);
        if let Some(block) = pick(&agents[s]).get(&arc) {
            members.push(arc);
            values.extend_from_slice(block);
        }
    }
    DualVector::new(
        IndexSet::new(l, members).expect("arcs in range"),
        n,
        values,
    )
    .expect("consistent dual layout")
}

pub fn assemble_y(agents: &[AgentState], graph: &CommGraph, n: usize) -> DualVector {
    assemble_dual(agents, graph, n, |a| &a.duals)
}

pub fn assemble_p(agents: &[AgentState], graph: &CommGraph, n: usize) -> DualVector {
    assemble_dual(agents, graph, n, |a| &a.p_own)
}

/// Result of a decentralized run: the same trace and iterate history as
/// the centralized engine, plus the message ledger and phase timings.
#[derive(Debug, Clone)]
pub struct PdmiRun {
    pub result: RunResult,
    pub agents: Vec<AgentState>,
    pub ledger: Vec<Message>,
    pub timings: PhaseTimings,
}

/// Run the decentralized method; mirrors `solver::run` executed through
/// `pdmi_round`.
pub fn run_pdmi(
    prob: &ProblemInstance,
    schedule: &TopologySchedule,
    policy: &StepsizePolicy,
    stop: &StoppingRule,
    budget: usize,
    x0: &BlockVector,
) -> Result<PdmiRun> {
    if budget < 1 {
        return Err(Error::invalid("budget", "must be >= 1"));
    }
    let graph = schedule.graph();
    let n = prob.block_dim();
    let l = graph.arc_count();
    let (mut agents, mut ledger) = init_agents(prob, graph, x0)?;
    let initial_x = assemble_x(&agents, n);
    let initial_dist = distance_to_reference(prob, &initial_x, &DualVector::zero(l, n));

    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut timings = PhaseTimings::default();
    let mut prev_active = schedule.next(1); // caches are fresh after setup
    let mut prev_step_norm = f64::INFINITY;
    let mut stop_reason = StopReason::BudgetExhausted;
    let mut state = PdmState {
        k: 0,
        x: initial_x,
        y: DualVector::zero(l, n),
        p_last: DualVector::zero(l, n),
        active: IndexSet::empty(l),
        lambda: 0.0,
    };
    for k in 1..=budget {
        let active = schedule.next(k);
        let lambda = policy.stepsize(&prob.constraints, &active)?;
        let tol = inner_tolerance(prev_step_norm);
        let prev_x = state.x.clone();
        let prev_y = state.y.clone();
        let (messages, round_timings) =
            pdmi_round(&mut agents, graph, &prev_active, &active, k, lambda, tol)?;
        ledger.extend(messages);
        timings.add(&round_timings);
        state = PdmState {
            k,
            x: assemble_x(&agents, n),
            y: assemble_y(&agents, graph, n),
            p_last: assemble_p(&agents, graph, n),
            active: active.clone(),
            lambda,
        };
        let record = make_record(prob, &state, &prev_x, &prev_y)?;
        prev_step_norm = record.step_norm;
        let done = record.full_residual <= stop.epsilon && record.step_norm <= stop.epsilon;
        trace.push(record);
        iterates.push((state.x.clone(), state.y.clone()));
        prev_active = active;
        if done {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    Ok(PdmiRun {
        result: RunResult {
            state,
            trace,
            stop: stop_reason,
            initial_dist_to_ref: initial_dist,
            iterates,
        },
        agents,
        ledger,
        timings,
    })
}

/// Expected message count for a round: 4 per active arc, plus 2 per arc
/// that (re)entered the active set.
pub fn expected_round_messages(active: usize, newly_active: usize) -> usize {
    4 * active + 2 * newly_active
}

/// Maximum deviation between two iterate histories.
#[derive(Debug, Clone, Copy)]
pub struct CompareReport {
    pub max_x_dev: f64,
    pub max_y_dev: f64,
    pub pass: bool,
}

/// Compare runs produced with identical problem, schedule, stepsizes and
/// tolerances; passes iff both deviations stay within 1e-12.
pub fn compare_runs(a: &RunResult, b: &RunResult) -> Result<CompareReport> {
    if a.iterates.len() != b.iterates.len() {
        return Err(Error::DimensionMismatch {
            axis: "iterate history length",
            expected: a.iterates.len(),
            actual: b.iterates.len(),
        });
    }
    let mut max_x_dev = 0.0f64;
    let mut max_y_dev = 0.0f64;
    for ((xa, ya), (xb, yb)) in a.iterates.iter().zip(b.iterates.iter()) {
        max_x_dev = max_x_dev.max(xa.sub(xb).norm());
        max_y_dev = max_y_dev.max(ya.diff_norm(yb));
    }
    Ok(CompareReport {
        max_x_dev,
        max_y_dev,
        pass: max_x_dev <= 1e-12 && max_y_dev <= 1e-12,
    })
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Export the ledger as JSON lines: one message per line with a payload
/// fingerprint instead of the raw values.
pub fn write_ledger<W: Write>(messages: &[Message], mut out: W) -> Result<()> {
    for msg in messages {
        let mut bytes = Vec::with_capacity(msg.payload.len() * 8);
        for v in &msg.payload {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let line = serde_json::json!({
            "round": msg.round,
            "phase": msg.phase,
            "sender": msg.sender,
            "receiver": msg.receiver,
            "arc": msg.arc,
            "kind": msg.kind.as_str(),
            "payload_hash": format!("{:016x}", fnv1a64(&bytes)),
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}
