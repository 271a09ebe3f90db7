use std::fmt;
use std::str::FromStr;

use crate::dynamics::Preset;
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_SEGMENTS;

/// Queue ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PriorityPolicy {
    /// `g + ĥ`.
    Fhat,
    /// `max(g + ĥ, 2g)`.
    MmMax,
}

/// When a batch's search stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TerminationPolicy {
    /// Stop at the batch's first improving intersection, or on the lower
    /// bound.
    FirstIntersectionPlusLb,
    /// Stop only when the incumbent is proven optimal for the batch graph.
    LbOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Connection {
    RDisk,
    Knn,
}

/// Source of the a priori cost-to-go and cost-to-come estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeuristicKind {
    /// Obstacle-free optimal steering cost.
    Controller,
    /// Straight-line position distance times the preset's rate. Not
    /// admissible in general.
    Euclidean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClockMode {
    /// Deterministic work accounting.
    Work,
    /// Monotonic wall clock.
    Wall,
}

macro_rules! named_enum {
    ($ty:ty, $what:literal, $($variant:path => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self {
                    $($variant => $name,)+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::Precondition(format!(concat!("unknown ", $what, " `{}`"), other))),
                }
            }
        }
    };
}

named_enum!(PriorityPolicy, "priority", PriorityPolicy::Fhat => "fhat", PriorityPolicy::MmMax => "mm");
named_enum!(
    TerminationPolicy,
    "termination",
    TerminationPolicy::FirstIntersectionPlusLb => "first-lb",
    TerminationPolicy::LbOnly => "lb",
);
named_enum!(Connection, "connection", Connection::RDisk => "rdisk", Connection::Knn => "knn");
named_enum!(
    HeuristicKind,
    "heuristic",
    HeuristicKind::Controller => "controller",
    HeuristicKind::Euclidean => "euclidean",
);
named_enum!(ClockMode, "clock", ClockMode::Work => "work", ClockMode::Wall => "wall");

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    /// Samples drawn per batch.
    pub batch_size: usize,
    /// Seconds on the configured clock.
    pub time_budget: f64,
    pub seed: u64,
    /// Trajectory segments checked per edge.
    pub segments: usize,
    pub priority: PriorityPolicy,
    pub termination: TerminationPolicy,
    pub connection: Connection,
    pub heuristic: HeuristicKind,
    pub clock: ClockMode,
    /// Raise heuristics on the fly from the opposite search's progress.
    pub heuristic_update: bool,
    /// Stop after this many batches.
    pub max_batches: Option<usize>,
    /// Stop as soon as any solution exists.
    pub stop_at_first_solution: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            batch_size: 200,
            time_budget: 2.0,
            seed: 0,
            segments: DEFAULT_SEGMENTS,
            priority: PriorityPolicy::Fhat,
            termination: TerminationPolicy::FirstIntersectionPlusLb,
            connection: Connection::RDisk,
            heuristic: HeuristicKind::Controller,
            clock: ClockMode::Work,
            heuristic_update: true,
            max_batches: None,
            stop_at_first_solution: false,
        }
    }
}

impl PlannerConfig {
    /// Batch size and budget used for a preset's benchmarks.
    pub fn for_preset(preset: Preset) -> Self {
        let (batch_size, time_budget) = match preset {
            Preset::Dir4d => (200, 2.0),
            Preset::Lq10d => (300, 10.0),
            Preset::Si2d => (100, 1.0),
        };
        PlannerConfig {
            batch_size,
            time_budget,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Precondition("batch size must be at least 1".into()));
        }
        if !(self.time_budget > 0.0) || !self.time_budget.is_finite() {
            return Err(Error::Precondition(format!(
                "time budget must be positive and finite, got {}",
                self.time_budget
            )));
        }
        if self.segments == 0 {
            return Err(Error::Precondition("segment count must be positive".into()));
        }
        if self.max_batches == Some(0) {
            return Err(Error::Precondition("max_batches must be positive".into()));
        }
        Ok(())
    }
}
