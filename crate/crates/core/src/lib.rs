//! Kinodynamic bidirectional batch-informed planning for linear systems.
//!
//! [`dynamics`] steers between states optimally, [`geometry`] checks
//! states and trajectories against the scenario, [`sampling`] draws
//! informed batches, [`graph`] stores the states and answers neighbor
//! queries, and [`search`] runs the anytime bidirectional search.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod sampling;
pub mod search;

pub use error::{Error, Result};
pub use geometry::Scenario;
pub use search::{plan, plan_baseline, PlanOutcome, PlannerConfig};
