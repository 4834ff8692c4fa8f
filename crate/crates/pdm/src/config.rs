//! JSON experiment configuration and the backends of the `solve`,
//! `verify`, and `bench` commands. The CLI binary is a thin wrapper over
//! these functions, so they are testable without spawning a process.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{BlockVector, IndexSet};
use crate::problem::{FeasibleSet, ObjectiveKind, PenaltyPower, ProblemInstance};
use crate::sim::{self, run_pdmi};
use crate::solver::{
    check_fejer, run, StepsizeMode, StepsizePolicy, StopReason, StoppingRule,
};
use crate::topology::{CommGraph, ScheduleKind, TopologySchedule};

pub const TRACE_HEADER: &str =
    "k,lambda,objective,primal_residual,full_residual,step_norm,p_minus_y,p_minus_yprev,dist_to_ref,active_count";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    Complete { vertices: usize },
    Path { vertices: usize },
    Ring { vertices: usize },
    Star { vertices: usize },
    Explicit { vertices: usize, arcs: Vec<(usize, usize)> },
    RandomGnp { vertices: usize, probability: f64, seed: u64 },
}

impl GraphConfig {
    pub fn build(&self) -> Result<CommGraph> {
        match self {
            GraphConfig::Complete { vertices } => Ok(CommGraph::complete(*vertices)),
            GraphConfig::Path { vertices } => Ok(CommGraph::path(*vertices)),
            GraphConfig::Ring { vertices } => CommGraph::ring(*vertices),
            GraphConfig::Star { vertices } => Ok(CommGraph::star(*vertices)),
            GraphConfig::Explicit { vertices, arcs } => CommGraph::new(*vertices, arcs),
            GraphConfig::RandomGnp {
                vertices,
                probability,
                seed,
            } => CommGraph::random_gnp(*vertices, *probability, *seed),
        }
    }

    pub fn vertices(&self) -> usize {
        match self {
            GraphConfig::Complete { vertices }
            | GraphConfig::Path { vertices }
            | GraphConfig::Ring { vertices }
            | GraphConfig::Star { vertices }
            | GraphConfig::Explicit { vertices, .. }
            | GraphConfig::RandomGnp { vertices, .. } => *vertices,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceConfig {
    pub gradient: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `f_i(v) = 0.5 ||v - c_i||^2` with optional per-block boxes.
    QuadraticConsensus {
        dim: usize,
        centers: Vec<Vec<f64>>,
        #[serde(default)]
        boxes: Option<Vec<BoxConfig>>,
    },
    /// `f_i(v) = (1/p) max{<g_i,v> - h_i, 0}^p`.
    PenalizedFeasibility {
        dim: usize,
        halfspaces: Vec<HalfspaceConfig>,
        /// 1 or 2
        power: u8,
        #[serde(default)]
        feasible_point: Option<Vec<f64>>,
    },
    /// Weighted quadratics with mandatory boxes.
    ConstrainedLeastSquares {
        dim: usize,
        weights: Vec<f64>,
        centers: Vec<Vec<f64>>,
        boxes: Vec<BoxConfig>,
    },
}

impl ProblemConfig {
    pub fn dim(&self) -> usize {
        match self {
            ProblemConfig::QuadraticConsensus { dim, .. }
            | ProblemConfig::PenalizedFeasibility { dim, .. }
            | ProblemConfig::ConstrainedLeastSquares { dim, .. } => *dim,
        }
    }

    pub fn build(&self, graph: &CommGraph) -> Result<ProblemInstance> {
        match self {
            ProblemConfig::QuadraticConsensus { dim, centers, boxes } => {
                let boxes = boxes
                    .as_ref()
                    .map(|list| {
                        list.iter()
                            .map(|b| FeasibleSet::validated_box(b.lower.clone(), b.upper.clone()))
                            .collect::<Result<Vec<_>>>()
                    })
                    .transpose()?;
                ProblemInstance::quadratic_consensus(graph, *dim, centers.clone(), boxes)
            }
            ProblemConfig::PenalizedFeasibility {
                dim,
                halfspaces,
                power,
                feasible_point,
            } => {
                let power = match power {
                    1 => PenaltyPower::Linear,
                    2 => PenaltyPower::Quadratic,
                    other => {
                        return Err(Error::invalid(
                            "problem.power",
                            format!("must be 1 or 2, got {other}"),
                        ))
                    }
                };
                let halfspaces = halfspaces
                    .iter()
                    .map(|h| (h.gradient.clone(), h.offset))
                    .collect();
                ProblemInstance::penalized_feasibility(
                    graph,
                    *dim,
                    halfspaces,
                    power,
                    feasible_point.clone(),
                )
            }
            ProblemConfig::ConstrainedLeastSquares {
                dim,
                weights,
                centers,
                boxes,
            } => {
                let boxes = boxes
                    .iter()
                    .map(|b| FeasibleSet::validated_box(b.lower.clone(), b.upper.clone()))
                    .collect::<Result<Vec<_>>>()?;
                ProblemInstance::constrained_least_squares(
                    graph,
                    *dim,
                    weights.clone(),
                    centers.clone(),
                    boxes,
                )
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// All arcs active every iteration.
    StaticFull,
    Static { arcs: Vec<usize> },
    Cyclic { sets: Vec<Vec<usize>> },
    RandomWithCore {
        core: Vec<usize>,
        extra_probability: f64,
        seed: u64,
    },
    Adversarial { sets: Vec<Vec<usize>> },
}

impl ScheduleConfig {
    pub fn build(&self, graph: CommGraph) -> Result<TopologySchedule> {
        let l = graph.arc_count();
        let to_set = |arcs: &[usize]| IndexSet::new(l, arcs.to_vec());
        let kind = match self {
            ScheduleConfig::StaticFull => ScheduleKind::Static(IndexSet::full(l)),
            ScheduleConfig::Static { arcs } => ScheduleKind::Static(to_set(arcs)?),
            ScheduleConfig::Cyclic { sets } => ScheduleKind::Cyclic(
                sets.iter().map(|s| to_set(s)).collect::<Result<Vec<_>>>()?,
            ),
            ScheduleConfig::RandomWithCore {
                core,
                extra_probability,
                seed,
            } => ScheduleKind::RandomWithCore {
                core: to_set(core)?,
                extra_probability: *extra_probability,
                seed: *seed,
            },
            ScheduleConfig::Adversarial { sets } => ScheduleKind::Adversarial(
                sets.iter().map(|s| to_set(s)).collect::<Result<Vec<_>>>()?,
            ),
        };
        TopologySchedule::new(graph, kind)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepsizeConfig {
    PerIterationNorm { tau: f64 },
    FixedUpperBound { tau: f64, max_degree: usize },
    Constant { tau: f64, value: f64 },
}

impl StepsizeConfig {
    pub fn tau(&self) -> f64 {
        match self {
            StepsizeConfig::PerIterationNorm { tau }
            | StepsizeConfig::FixedUpperBound { tau, .. }
            | StepsizeConfig::Constant { tau, .. } => *tau,
        }
    }

    pub fn build(&self) -> Result<StepsizePolicy> {
        match self {
            StepsizeConfig::PerIterationNorm { tau } => {
                StepsizePolicy::new(*tau, StepsizeMode::PerIterationNorm)
            }
            StepsizeConfig::FixedUpperBound { tau, max_degree } => StepsizePolicy::new(
                *tau,
                StepsizeMode::FixedUpperBound {
                    max_degree: *max_degree,
                },
            ),
            StepsizeConfig::Constant { tau, value } => {
                StepsizePolicy::new(*tau, StepsizeMode::Constant { value: *value })
            }
        }
    }
}

fn default_epsilon() -> f64 {
    1e-8
}

fn default_budget() -> usize {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Centralized,
    MultiAgent,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub trace: Option<String>,
    pub summary: Option<String>,
    pub ledger: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Agent counts to sweep; the configured graph kind is rebuilt per size.
    pub sizes: Vec<usize>,
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub graph: GraphConfig,
    pub schedule: ScheduleConfig,
    pub stepsize: StepsizeConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Initial point, one row per agent; zeros when omitted.
    #[serde(default)]
    pub x0: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let tau = self.stepsize.tau();
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(
                "stepsize.tau",
                format!("must lie in (0, 1), got {tau}"),
            ));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon", "must be >= 0"));
        }
        if self.budget < 1 {
            return Err(Error::invalid("budget", "must be >= 1"));
        }
        let m = self.graph.vertices();
        if let Some(rows) = &self.x0 {
            if rows.len() != m {
                return Err(Error::invalid(
                    "x0",
                    format!("expected {m} rows, got {}", rows.len()),
                ));
            }
            let n = self.problem.dim();
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::invalid(
                        "x0",
                        format!("row {i} has length {}, expected {n}", row.len()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Override the stochastic seeds (schedule, random graph, bench).
    pub fn apply_seed(&mut self, seed: u64) {
        if let GraphConfig::RandomGnp { seed: s, .. } = &mut self.graph {
            *s = seed;
        }
        if let ScheduleConfig::RandomWithCore { seed: s, .. } = &mut self.schedule {
            *s = seed;
        }
        if let Some(bench) = &mut self.bench {
            bench.seed = seed;
        }
    }

    pub fn initial_point(&self) -> Result<BlockVector> {
        let m = self.graph.vertices();
        let n = self.problem.dim();
        match &self.x0 {
            None => Ok(BlockVector::zeros(m, n)),
            Some(rows) => BlockVector::from_blocks(rows),
        }
    }
}

/// Everything `solve` produced, for programmatic use and for the summary.
pub struct SolveOutcome {
    pub result: crate::solver::RunResult,
    pub compare: Option<sim::CompareReport>,
    pub messages: usize,
}

fn write_trace<W: Write>(result: &crate::solver::RunResult, mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in &result.trace {
        let dist = r
            .dist_to_ref
            .map_or_else(String::new, |d| format!("{d:.17e}"));
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{}",
            r.k,
            r.lambda,
            r.objective,
            r.primal_residual,
            r.full_residual,
            r.step_norm,
            r.p_minus_y,
            r.p_minus_y_prev,
            dist,
            r.active_count,
        )?;
    }
    Ok(())
}

fn summary_json(config: &ExperimentConfig, outcome: &SolveOutcome) -> serde_json::Value {
    let result = &outcome.result;
    let last = result.trace.last();
    serde_json::json!({
        "engine": match config.engine {
            Engine::Centralized => "centralized",
            Engine::MultiAgent => "multi_agent",
            Engine::Both => "both",
        },
        "stop": result.stop.as_str(),
        "iterations": result.state.k,
        "objective": last.map(|r| r.objective),
        "full_residual": last.map(|r| r.full_residual),
        "step_norm": last.map(|r| r.step_norm),
        "dist_to_ref": last.and_then(|r| r.dist_to_ref),
        "messages": outcome.messages,
        "engine_deviation": outcome.compare.as_ref().map(|c| {
            serde_json::json!({ "x": c.max_x_dev, "y": c.max_y_dev, "pass": c.pass })
        }),
    })
}

/// Run the configured experiment. Writes the trace, summary, and ledger
/// files when configured.
pub fn execute_solve(config: &ExperimentConfig) -> Result<SolveOutcome> {
    let graph = config.graph.build()?;
    let prob = config.problem.build(&graph)?;
    let schedule = config.schedule.build(graph)?;
    let policy = config.stepsize.build()?;
    let stop = StoppingRule {
        epsilon: config.epsilon,
    };
    let x0 = config.initial_point()?;

    let mut compare = None;
    let mut messages = 0;
    let mut ledger: Option<Vec<sim::Message>> = None;
    let result = match config.engine {
        Engine::Centralized => run(&prob, &schedule, &policy, &stop, config.budget, &x0)?,
        Engine::MultiAgent => {
            let run = run_pdmi(&prob, &schedule, &policy, &stop, config.budget, &x0)?;
            messages = run.ledger.len();
            ledger = Some(run.ledger);
            run.result
        }
        Engine::Both => {
            let central = run(&prob, &schedule, &policy, &stop, config.budget, &x0)?;
            let distributed = run_pdmi(&prob, &schedule, &policy, &stop, config.budget, &x0)?;
            compare = Some(sim::compare_runs(&central, &distributed.result)?);
            messages = distributed.ledger.len();
            ledger = Some(distributed.ledger);
            central
        }
    };

    if let Some(path) = &config.outputs.trace {
        let file = fs::File::create(path)?;
        write_trace(&result, std::io::BufWriter::new(file))?;
    }
    if let Some(path) = &config.outputs.ledger {
        match &ledger {
            Some(msgs) => {
                let file = fs::File::create(path)?;
                sim::write_ledger(msgs, std::io::BufWriter::new(file))?;
            }
            None => {
                return Err(Error::invalid(
                    "outputs.ledger",
                    "a message ledger requires engine \"multi_agent\" or \"both\"",
                ));
            }
        }
    }
    let outcome = SolveOutcome {
        result,
        compare,
        messages,
    };
    if let Some(path) = &config.outputs.summary {
        let json = summary_json(config, &outcome);
        fs::write(path, serde_json::to_string_pretty(&json)?)?;
    }
    Ok(outcome)
}

/// `solve` command: 0 converged, 2 budget exhausted, 1 error.
pub fn cmd_solve(config: &ExperimentConfig, quiet: bool) -> i32 {
    match execute_solve(config) {
        Ok(outcome) => {
            if !quiet {
                let json = summary_json(config, &outcome);
                println!("{}", serde_json::to_string_pretty(&json).unwrap());
            }
            match outcome.result.stop {
                StopReason::Converged => 0,
                StopReason::BudgetExhausted => 2,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Independent health checks on the configured experiment: contraction of
/// the distance to the reference point, per-block prox optimality against
/// random candidates, the degree bound on the constraint operator norm,
/// and connectivity of the scheduled topology over a window.
pub fn execute_verify(config: &ExperimentConfig) -> Result<Vec<CheckResult>> {
    let graph = config.graph.build()?;
    let prob = config.problem.build(&graph)?;
    let schedule = config.schedule.build(graph.clone())?;
    let policy = config.stepsize.build()?;
    let stop = StoppingRule {
        epsilon: config.epsilon,
    };
    let x0 = config.initial_point()?;
    let budget = config.budget.min(2_000);
    let result = run(&prob, &schedule, &policy, &stop, budget, &x0)?;
    let mut checks = Vec::new();

    // Distance to the reference point must shrink per the contraction
    // estimate (1e-9 slack per step).
    let tau = config.stepsize.tau();
    match check_fejer(&result, tau, 1e-9, 0) {
        Ok(report) => checks.push(CheckResult {
            name: "contraction",
            pass: report.pass,
            detail: match &report.first_violation {
                None => format!("{} steps checked", report.checked),
                Some(v) => format!("violated at k={} ({:.3e} > {:.3e})", v.k, v.lhs, v.rhs),
            },
        }),
        Err(e) => checks.push(CheckResult {
            name: "contraction",
            pass: false,
            detail: e.to_string(),
        }),
    }

    // Prox optimality: the computed minimizer must beat random feasible
    // candidates on the prox objective.
    checks.push(prox_optimality_check(&prob, &x0)?);

    // Operator norm bound sqrt(2 * max active degree) on scheduled sets.
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pass = true;
    for k in 1..=8usize {
        let set = schedule.next(k);
        if set.is_empty() {
            continue;
        }
        let norm = prob.constraints.operator_norm(&set, 1e-10)?;
        let bound = (2.0 * graph.max_degree(&set) as f64).sqrt();
        worst = worst.max(norm - bound);
        if norm > bound + 1e-8 {
            pass = false;
        }
    }
    checks.push(CheckResult {
        name: "operator-norm-bound",
        pass,
        detail: if worst == f64::NEG_INFINITY {
            "no nonempty active sets in window".into()
        } else {
            format!("max (norm - bound) = {worst:.3e}")
        },
    });

    // The union of active arcs over a window must connect the agents,
    // otherwise consensus cannot be reached.
    let l = graph.arc_count();
    let mut union = IndexSet::empty(l);
    for k in 1..=32usize.max(config.budget.min(64)) {
        union = union.union(&schedule.next(k));
    }
    let connected = graph.is_connected(&union);
    checks.push(CheckResult {
        name: "window-connectivity",
        pass: connected,
        detail: format!(
            "union of {} arcs over the window, connected = {connected}",
            union.len()
        ),
    });

    Ok(checks)
}

fn prox_optimality_check(prob: &ProblemInstance, x0: &BlockVector) -> Result<CheckResult> {
    let ObjectiveKind::Separable(blocks) = &prob.objective else {
        return Ok(CheckResult {
            name: "prox-optimality",
            pass: true,
            detail: "skipped for non-separable objective".into(),
        });
    };
    let m = prob.block_count();
    let n = prob.block_dim();
    let lambda = 0.37;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = f64::NEG_INFINITY;
    let lin = BlockVector::from_vec(
        m,
        n,
        (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )?;
    let v_star = prob.prox_primal(&lin, x0, lambda, 1e-12)?;
    let prox_value = |i: usize, v: &[f64]| -> f64 {
        let u = x0.block(i);
        let mut val = blocks[i].value(v);
        for j in 0..n {
            val += lin.block(i)[j] * v[j];
            let d = v[j] - u[j];
            val += d * d / (2.0 * lambda);
        }
        val
    };
    for i in 0..m {
        let best = prox_value(i, v_star.block(i));
        for _ in 0..60 {
            let mut cand: Vec<f64> = v_star.block(i).to_vec();
            for c in cand.iter_mut() {
                *c += rng.gen_range(-1.0..1.0);
            }
            prob.feasible[i].project(&mut cand);
            worst = worst.max(best - prox_value(i, &cand));
        }
    }
    Ok(CheckResult {
        name: "prox-optimality",
        pass: worst <= 1e-9,
        detail: format!("max (prox value - candidate value) = {worst:.3e}"),
    })
}

/// `verify` command: prints one line per check, exit 0 iff all pass.
pub fn cmd_verify(config: &ExperimentConfig, quiet: bool) -> i32 {
    match execute_verify(config) {
        Ok(checks) => {
            let mut all = true;
            for c in &checks {
                all &= c.pass;
                if !quiet {
                    println!(
                        "{:<22} {}  {}",
                        c.name,
                        if c.pass { "PASS" } else { "FAIL" },
                        c.detail
                    );
                }
            }
            if all {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub agents: usize,
    pub arcs: usize,
    pub rounds: usize,
    pub messages: usize,
    pub phase1_us: u128,
    pub phase2_us: u128,
    pub phase3_us: u128,
    pub total_us: u128,
}

/// Sweep the multi-agent engine over problem sizes, reporting per-phase
/// wall-clock cost and message counts per size.
pub fn execute_bench(config: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    let bench = config.bench.as_ref().ok_or_else(|| {
        Error::invalid("bench", "the bench command needs a `bench` section")
    })?;
    if bench.sizes.is_empty() || bench.rounds == 0 {
        return Err(Error::invalid("bench", "needs nonempty sizes and rounds >= 1"));
    }
    let n = config.problem.dim();
    let mut rows = Vec::new();
    for &m in &bench.sizes {
        let graph = match &config.graph {
            GraphConfig::Complete { .. } => CommGraph::complete(m),
            GraphConfig::Path { .. } => CommGraph::path(m),
            GraphConfig::Ring { .. } => CommGraph::ring(m)?,
            GraphConfig::Star { .. } => CommGraph::star(m),
            GraphConfig::Explicit { .. } | GraphConfig::RandomGnp { .. } => {
                CommGraph::random_gnp(m, 0.5, bench.seed)?
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(bench.seed ^ m as u64);
        let centers: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let prob = ProblemInstance::quadratic_consensus(&graph, n, centers, None)?;
        let schedule = TopologySchedule::static_full(graph.clone());
        let policy = config.stepsize.build()?;
        let started = Instant::now();
        let run = run_pdmi(
            &prob,
            &schedule,
            &policy,
            &StoppingRule { epsilon: 0.0 },
            bench.rounds,
            &BlockVector::zeros(m, n),
        )?;
        let total = started.elapsed();
        rows.push(BenchRow {
            agents: m,
            arcs: graph.arc_count(),
            rounds: run.result.trace.len(),
            messages: run.ledger.len(),
            phase1_us: run.timings.phase1.as_micros(),
            phase2_us: run.timings.phase2.as_micros(),
            phase3_us: run.timings.phase3.as_micros(),
            total_us: total.as_micros(),
        });
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "agents,arcs,rounds,messages,phase1_us,phase2_us,phase3_us,total_us"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.agents, r.arcs, r.rounds, r.messages, r.phase1_us, r.phase2_us, r.phase3_us, r.total_us
        )?;
    }
    Ok(())
}

/// `bench` command: CSV to stdout (and `outputs.trace` if set).
pub fn cmd_bench(config: &ExperimentConfig, quiet: bool) -> i32 {
    match execute_bench(config) {
        Ok(rows) => {
            if !quiet {
                let mut buf = Vec::new();
                write_bench_csv(&rows, &mut buf).unwrap();
                print!("{}", String::from_utf8(buf).unwrap());
            }
            if let Some(path) = &config.outputs.trace {
                let file = match fs::File::create(path) {
                    Ok(f) => f,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return 1;
                    }
                };
                if let Err(e) = write_bench_csv(&rows, std::io::BufWriter::new(file)) {
                    eprintln!("error: {e}");
                    return 1;
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config() -> ExperimentConfig {
        serde_json::from_str(
            r#"{
                "problem": {
                    "kind": "quadratic_consensus",
                    "dim": 1,
                    "centers": [[0.0], [2.0], [4.0]]
                },
                "graph": { "kind": "ring", "vertices": 3 },
                "schedule": { "kind": "static_full" },
                "stepsize": { "mode": "per_iteration_norm", "tau": 0.1 },
                "epsilon": 1e-9,
                "budget": 5000
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = sample_config();
        let text = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.budget, config.budget);
        assert_eq!(back.problem.dim(), 1);
        back.validate().unwrap();
    }

    #[test]
    fn validation_names_the_bad_field() {
        let mut config = sample_config();
        config.stepsize = StepsizeConfig::PerIterationNorm { tau: 1.5 };
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("stepsize.tau"));
    }

    #[test]
    fn solve_converges_on_sample() {
        let config = sample_config();
        let outcome = execute_solve(&config).unwrap();
        assert!(matches!(outcome.result.stop, StopReason::Converged));
        let x = &outcome.result.state.x;
        assert!((x.block(0)[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn both_engines_agree_via_config() {
        let mut config = sample_config();
        config.engine = Engine::Both;
        config.budget = 200;
        config.epsilon = 0.0;
        let outcome = execute_solve(&config).unwrap();
        let report = outcome.compare.unwrap();
        assert!(report.pass, "x dev {}", report.max_x_dev);
        assert!(outcome.messages > 0);
    }

    #[test]
    fn verify_passes_on_sample() {
        let config = sample_config();
        let checks = execute_verify(&config).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }

    #[test]
    fn trace_csv_shape() {
        let config = sample_config();
        let outcome = execute_solve(&config).unwrap();
        let mut buf = Vec::new();
        write_trace(&outcome.result, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER);
        assert_eq!(text.lines().count(), outcome.result.trace.len() + 1);
    }

    #[test]
    fn bench_produces_rows() {
        let mut config = sample_config();
        config.bench = Some(BenchConfig {
            sizes: vec![3, 5],
            rounds: 10,
            seed: 1,
        });
        let rows = execute_bench(&config).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].rounds, 10);
        assert_eq!(rows[0].messages, 2 * rows[0].arcs + 10 * 4 * rows[0].arcs);
    }
}
