//! Budget accounting.
//!
//! The work clock charges a fixed price per unit of kernel work instead of
//! reading the system clock, so a run's event times and its stopping point
//! depend only on the inputs. Prices are calibrated so that work time
//! tracks wall time on a single desktop core in an optimised build.

use std::time::Instant;

use super::config::ClockMode;

/// Nanoseconds per steering-cost evaluation: `base + quad · n²`.
const EVAL_NS_BASE: f64 = 62.0;
const EVAL_NS_QUAD: f64 = 13.0;
/// Nanoseconds per trajectory state checked for collisions.
const STATE_NS_BASE: f64 = 88.0;
const STATE_NS_QUAD: f64 = 9.5;
/// Nanoseconds to set up one edge's trajectory before checking it.
const EDGE_NS_BASE: f64 = 1980.0;
const EDGE_NS_QUAD: f64 = 61.0;
/// Nanoseconds per spatial-index node visited or neighbor reported.
const INDEX_NS: f64 = 25.0;
/// Fixed bookkeeping per expansion or queue operation.
const EXPAND_NS: f64 = 400.0;
/// Nanoseconds per informed-sampling draw, excluding its steering.
const DRAW_NS: f64 = 150.0;

#[derive(Clone, Debug)]
pub struct WorkClock {
    mode: ClockMode,
    started: Instant,
    work_ns: f64,
    eval_ns: f64,
    state_ns: f64,
    edge_ns: f64,
}

impl WorkClock {
    /// Starts the clock for a state dimension of `n`.
    pub fn start(mode: ClockMode, n: usize) -> Self {
        let n2 = (n * n) as f64;
        WorkClock {
            mode,
            started: Instant::now(),
            work_ns: 0.0,
            eval_ns: EVAL_NS_BASE + EVAL_NS_QUAD * n2,
            state_ns: STATE_NS_BASE + STATE_NS_QUAD * n2,
            edge_ns: EDGE_NS_BASE + EDGE_NS_QUAD * n2,
        }
    }

    pub fn charge_evaluations(&mut self, evaluations: usize) {
        self.work_ns += self.eval_ns * evaluations as f64;
    }

    pub fn charge_states(&mut self, states: usize) {
        self.work_ns += self.state_ns * states as f64;
    }

    pub fn charge_edge_setup(&mut self) {
        self.work_ns += self.edge_ns;
    }

    pub fn charge_index(&mut self, visits: usize) {
        self.work_ns += INDEX_NS * visits as f64;
    }

    pub fn charge_expansion(&mut self) {
        self.work_ns += EXPAND_NS;
    }

    pub fn charge_draws(&mut self, draws: usize) {
        self.work_ns += DRAW_NS * draws as f64;
    }

    /// Seconds since start, quantized to whole microseconds.
    pub fn elapsed(&self) -> f64 {
        let ns = match self.mode {
            ClockMode::Work => self.work_ns,
            ClockMode::Wall => self.started.elapsed().as_nanos() as f64,
        };
        (ns / 1000.0).floor() / 1e6
    }
}
