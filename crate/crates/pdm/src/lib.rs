// Parameter validations use `!(x > 0.0)` on purpose so NaN is rejected,
// and the numeric kernels index several slices in lockstep.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Primal-dual proximal solver for convex optimization under changing
//! linear equality constraints, with a decentralized multi-agent
//! realization over time-varying communication graphs.
//!
//! The crate is organized around:
//!
//! - [`linalg`]: block vectors, arc-indexed constraint systems
//!   `A_I x = b_I`, dual variables on an active arc set, operator norms,
//!   and the basic-index-set test.
//! - [`topology`]: communication graphs, Kirchhoff matrices, degree
//!   bounds, connectivity, and active-arc schedules.
//! - [`problem`]: objective and feasible-set oracles, the proximal
//!   subproblem solver, Lagrangian and saddle-point residuals, and a
//!   built-in problem library.
//! - [`solver`]: the centralized primal-dual iteration, stepsize policy,
//!   stopping rules, and a Fejér-monotonicity monitor.
//! - [`sim`]: a round-synchronous multi-agent simulator that distributes
//!   the same iteration across agents exchanging messages with their
//!   neighbors, plus an equivalence checker against the centralized run.
//! - [`config`]: experiment configuration, trace/ledger export, and the
//!   solve/verify/bench entry points used by the CLI.
//!
//! See the `examples/` directory for one runnable example per capability.

pub mod config;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod sim;
pub mod solver;
pub mod topology;
pub mod union_find;

pub use error::{Error, Result};
