//! Anytime bidirectional batch search.
//!
//! Each batch adds informed samples to the graph and runs two best-first
//! searches, forward from the start and backward from the goal, over the
//! implicit graph. Expanding a state evaluates its neighbors' edges
//! eagerly, rewires either tree when a cheaper valid edge appears and
//! checks whether the improved state also lies in the opposite tree.
//!
//! A batch ends at its first improving intersection (under
//! [`TerminationPolicy::FirstIntersectionPlusLb`]) or once the incumbent
//! meets a lower bound on every undiscovered solution:
//!
//! ```text
//! C_best ≤ max(min(k_F, k_B), f_F, f_B, g_F + g_B)
//! ```
//!
//! where `k` is the smallest queue key and `f`, `g` are the smallest
//! `g + ĥ` and `g` on each frontier. Between batches the graph is pruned
//! to states that can still improve the incumbent.
//!
//! States reached with `2g` above the incumbent are parked rather than
//! queued: the opposite search reaches any cheaper solution through them
//! first. Parked states still count towards the `f` and `g` bounds.

mod clock;
mod config;
mod engine;
mod explicit;
mod planner;
mod queue;

pub use clock::WorkClock;
pub use config::{ClockMode, Connection, HeuristicKind, PlannerConfig, PriorityPolicy, TerminationPolicy};
pub use explicit::{plan_on_graph, ExplicitEdge, ExplicitGraph, GraphExpansion, GraphPlan, GraphSearchConfig};
pub use planner::{plan, plan_baseline, AnytimeEvent, PlanOutcome, PlanStats, Planner, PlannerKind, Solution};
pub use queue::{Entry, Ord64, OpenQueue};
