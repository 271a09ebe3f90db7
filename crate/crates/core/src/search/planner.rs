use std::cell::RefCell;

use nalgebra::DVector;
use rustc_hash::{FxHashMap, FxHashSet};

use super::clock::WorkClock;
use super::config::{Connection, HeuristicKind, PlannerConfig, TerminationPolicy};
use super::engine::{BatchEnd, EdgeModel, Engine, EngineParams};
use crate::dynamics::{connect, steer_at, SteeringResult, TAU_GRID_POINTS};
use crate::error::{Error, Result};
use crate::geometry::{check_edge, Scenario};
use crate::graph::{connection_radius, knn_count, Dir, NodeId, Rgg};
use crate::sampling::{
    batch_rng, informed_sample_with, sample_prolate, sample_uniform, Estimate, SampleBatch,
};

/// One improvement of the incumbent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnytimeEvent {
    /// Seconds since the planner clock started.
    pub wall_time: f64,
    pub cost: f64,
    pub batch_index: u64,
}

/// Final incumbent of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub cost: f64,
    /// State ids from start to goal.
    pub path: Vec<NodeId>,
    pub states: Vec<DVector<f64>>,
    /// Time at which this solution was found.
    pub time: f64,
    pub batch_index: u64,
}

impl Solution {
    /// Steering result of every edge along the path.
    pub fn steer_edges(&self, scn: &Scenario) -> Result<Vec<SteeringResult>> {
        self.states
            .windows(2)
            .map(|w| connect(&scn.system, &w[0], &w[1]))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanStats {
    pub batches: u64,
    pub samples: usize,
    pub expansions: usize,
    /// Steering problems solved, excluding cache hits.
    pub steer_calls: usize,
    pub edge_checks: usize,
    pub states_checked: usize,
    pub pruned: usize,
    pub saturated_batches: usize,
    /// Planner clock at return.
    pub elapsed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutcome {
    /// Strictly decreasing costs in time order.
    pub events: Vec<AnytimeEvent>,
    /// States of each reported incumbent path, parallel to `events`.
    pub incumbents: Vec<Vec<DVector<f64>>>,
    pub solution: Option<Solution>,
    pub stats: PlanStats,
}

impl PlanOutcome {
    pub fn first_solution_time(&self) -> Option<f64> {
        self.events.first().map(|e| e.wall_time)
    }

    pub fn final_cost(&self) -> Option<f64> {
        self.events.last().map(|e| e.cost)
    }
}

/// Steering-backed edges over the sampled states.
struct KinoModel {
    scn: Scenario,
    segments: usize,
    connection: Connection,
    radius: f64,
    k: usize,
    steer: FxHashMap<(u32, u32), Estimate>,
    valid: FxHashMap<(u32, u32), bool>,
    clock: WorkClock,
    budget: f64,
    steer_calls: usize,
    edge_checks: usize,
    states_checked: usize,
}

impl KinoModel {
    fn estimate(&mut self, rgg: &Rgg, from: NodeId, to: NodeId) -> Estimate {
        if let Some(e) = self.steer.get(&(from.0, to.0)) {
            return *e;
        }
        let (a, b) = (&rgg.node(from).x, &rgg.node(to).x);
        self.steer_calls += 1;
        let e = match connect(&self.scn.system, a, b) {
            Ok(sr) => {
                self.clock.charge_evaluations(sr.evaluations);
                Estimate {
                    cost: sr.cost,
                    tau: sr.tau_star,
                }
            }
            Err(_) => {
                self.clock.charge_evaluations(TAU_GRID_POINTS);
                Estimate::UNREACHABLE
            }
        };
        self.steer.insert((from.0, to.0), e);
        e
    }
}

impl EdgeModel for KinoModel {
    fn candidates(&mut self, rgg: &Rgg, _dir: Dir, x: NodeId, out: &mut Vec<NodeId>) {
        let start = out.len();
        let q = &rgg.node(x).norm;
        let visited = match self.connection {
            Connection::RDisk => rgg.near_normalized(q, self.radius, Some(x), out),
            Connection::Knn => rgg.nearest_normalized(q, self.k, Some(x), out),
        };
        self.clock.charge_index(visited + out.len() - start);
    }

    fn cost(&mut self, rgg: &Rgg, from: NodeId, to: NodeId) -> f64 {
        self.estimate(rgg, from, to).cost
    }

    fn valid(&mut self, rgg: &Rgg, from: NodeId, to: NodeId) -> bool {
        if let Some(&v) = self.valid.get(&(from.0, to.0)) {
            return v;
        }
        let e = self.estimate(rgg, from, to);
        let ok = e.cost.is_finite()
            && match steer_at(&self.scn.system, &rgg.node(from).x, &rgg.node(to).x, e.tau) {
                Ok(sr) => {
                    self.clock.charge_edge_setup();
                    match check_edge(&self.scn, &sr, self.segments) {
                        Ok((ok, n)) => {
                            self.clock.charge_states(n);
                            self.states_checked += n;
                            ok
                        }
                        Err(_) => false,
                    }
                }
                Err(_) => false,
            };
        self.edge_checks += 1;
        self.valid.insert((from.0, to.0), ok);
        ok
    }

    fn exhausted(&mut self) -> bool {
        self.clock.elapsed() >= self.budget
    }

    fn now(&self) -> f64 {
        self.clock.elapsed()
    }

    fn on_expand(&mut self) {
        self.clock.charge_expansion();
    }

    fn forget(&mut self, removed: &FxHashSet<NodeId>) {
        let gone = |a: u32, b: u32| removed.contains(&NodeId(a)) || removed.contains(&NodeId(b));
        self.steer.retain(|&(a, b), _| !gone(a, b));
        self.valid.retain(|&(a, b), _| !gone(a, b));
    }
}

/// Which search runs over the shared batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlannerKind {
    /// Bidirectional search with first-intersection and lower-bound
    /// termination.
    Btit,
    /// Forward search alone; a batch ends when `f̂min_F ≥ C_best`.
    Baseline,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Btit => "btit",
            PlannerKind::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "btit" => Ok(PlannerKind::Btit),
            "baseline" => Ok(PlannerKind::Baseline),
            other => Err(Error::Precondition(format!("unknown planner `{other}`"))),
        }
    }
}

/// A planning run over one scenario.
pub struct Planner {
    scn: Scenario,
    cfg: PlannerConfig,
    engine: Engine,
    model: KinoModel,
    stats: PlanStats,
    trivial: bool,
    incumbents: Vec<Vec<DVector<f64>>>,
}

fn euclid(scn: &Scenario, rate: f64, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let ws = &scn.workspace;
    ws.position_dims()
        .iter()
        .map(|&i| (a[i] - b[i]).powi(2))
        .sum::<f64>()
        .sqrt()
        * rate
}

/// Steering estimate with the cost evaluations it took.
fn steer_estimate(scn: &Scenario, a: &DVector<f64>, b: &DVector<f64>) -> (Estimate, usize) {
    match connect(&scn.system, a, b) {
        Ok(sr) => (
            Estimate {
                cost: sr.cost,
                tau: sr.tau_star,
            },
            sr.evaluations,
        ),
        Err(_) => (Estimate::UNREACHABLE, TAU_GRID_POINTS),
    }
}

/// Estimates from the start and to the goal under `kind`.
fn prior_estimates(scn: &Scenario, kind: HeuristicKind, x: &DVector<f64>) -> ([Estimate; 2], usize) {
    match kind {
        HeuristicKind::Controller => {
            let (from_start, e0) = steer_estimate(scn, &scn.start, x);
            let (to_goal, e1) = steer_estimate(scn, x, &scn.goal);
            ([from_start, to_goal], e0 + e1)
        }
        HeuristicKind::Euclidean => {
            let rate = scn.preset.euclidean_rate();
            let e = |a, b| Estimate {
                cost: euclid(scn, rate, a, b),
                tau: f64::NAN,
            };
            ([e(&scn.start, x), e(x, &scn.goal)], 0)
        }
    }
}

impl Planner {
    /// Sets up the roots and starts the planner clock.
    pub fn new(scn: &Scenario, cfg: &PlannerConfig, kind: PlannerKind) -> Result<Self> {
        cfg.validate()?;
        let mut clock = WorkClock::start(cfg.clock, scn.state_dim());
        let mut rgg = Rgg::new(&scn.workspace, scn.radius_gamma);
        let trivial = scn.start == scn.goal;
        let mut steer = FxHashMap::default();
        let h = match cfg.heuristic {
            HeuristicKind::Controller => {
                let e = if trivial {
                    Estimate { cost: 0.0, tau: f64::NAN }
                } else {
                    let sr = connect(&scn.system, &scn.start, &scn.goal)?;
                    clock.charge_evaluations(sr.evaluations);
                    Estimate {
                        cost: sr.cost,
                        tau: sr.tau_star,
                    }
                };
                if !trivial {
                    steer.insert((0, 1), e);
                }
                e.cost
            }
            HeuristicKind::Euclidean => euclid(scn, scn.preset.euclidean_rate(), &scn.start, &scn.goal),
        };
        let start = rgg.add(scn.start.clone(), [h, 0.0]);
        let goal = rgg.add(scn.goal.clone(), [0.0, h]);
        rgg.rebuild_index();
        let params = EngineParams {
            priority: cfg.priority,
            termination: match kind {
                PlannerKind::Btit => cfg.termination,
                PlannerKind::Baseline => TerminationPolicy::LbOnly,
            },
            heuristic_update: cfg.heuristic_update,
            bidirectional: kind == PlannerKind::Btit,
            stop_at_first_solution: cfg.stop_at_first_solution,
            log_expansions: false,
        };
        let mut engine = Engine::new(rgg, start, goal, params);
        if trivial {
            engine.record_trivial(clock.elapsed());
        }
        Ok(Planner {
            scn: scn.clone(),
            cfg: cfg.clone(),
            engine,
            model: KinoModel {
                scn: scn.clone(),
                segments: cfg.segments,
                connection: cfg.connection,
                radius: f64::INFINITY,
                k: 1,
                steer,
                valid: FxHashMap::default(),
                clock,
                budget: cfg.time_budget,
                steer_calls: 0,
                edge_checks: 0,
                states_checked: 0,
            },
            stats: PlanStats::default(),
            trivial,
            incumbents: Vec::new(),
        })
    }

    pub fn rgg(&self) -> &Rgg {
        &self.engine.rgg
    }

    /// Connection radius of the most recent batch, in normalized units.
    pub fn radius(&self) -> f64 {
        self.model.radius
    }

    pub fn incumbent_cost(&self) -> f64 {
        self.engine.c_best
    }

    /// Draws batch `batch_index` against the current incumbent. Every
    /// planner kind draws identical batches for equal seeds and incumbents.
    pub fn draw_batch(&mut self, batch_index: u64) -> Result<SampleBatch> {
        let scn = &self.scn;
        let mut rng = batch_rng(self.cfg.seed, batch_index);
        let clock = RefCell::new(&mut self.model.clock);
        let budget = self.cfg.time_budget;
        let c_best = self.engine.c_best;
        let rate = scn.preset.euclidean_rate();
        let heuristic = self.cfg.heuristic;
        informed_sample_with(
            self.cfg.batch_size,
            c_best,
            batch_index,
            || {
                clock.borrow_mut().charge_draws(1);
                match heuristic {
                    HeuristicKind::Controller => sample_uniform(scn, &mut rng),
                    HeuristicKind::Euclidean => sample_prolate(scn, rate, c_best, &mut rng),
                }
            },
            |x| {
                let (est, evals) = prior_estimates(scn, heuristic, x);
                clock.borrow_mut().charge_evaluations(evals);
                est
            },
            || clock.borrow().elapsed() >= budget,
        )
    }

    fn insert_states(&mut self, states: Vec<DVector<f64>>, estimates: Option<Vec<[Estimate; 2]>>) {
        let (start, goal) = (self.engine.root(Dir::Forward), self.engine.root(Dir::Backward));
        for (i, x) in states.into_iter().enumerate() {
            let est = match &estimates {
                Some(e) => e[i],
                None => {
                    let (est, evals) = prior_estimates(&self.scn, self.cfg.heuristic, &x);
                    self.model.clock.charge_evaluations(evals);
                    est
                }
            };
            let id = self.engine.rgg.add(x, [est[1].cost, est[0].cost]);
            if self.cfg.heuristic == HeuristicKind::Controller {
                self.model.steer.insert((start.0, id.0), est[0]);
                self.model.steer.insert((id.0, goal.0), est[1]);
            }
        }
        self.refresh_index();
    }

    fn refresh_index(&mut self) {
        let rgg = &mut self.engine.rgg;
        if !rgg.index_is_fresh() {
            rgg.rebuild_index();
        }
        let q = rgg.q();
        self.model.clock.charge_index(q * (usize::BITS - q.leading_zeros()) as usize);
        self.model.radius = connection_radius(rgg.radius_gamma(), q as f64, rgg.dim()).unwrap_or(f64::INFINITY);
        self.model.k = knn_count(q);
    }

    /// Runs batches until the budget, `max_batches` or, when configured,
    /// the first solution.
    pub fn run(&mut self) -> Result<PlanOutcome> {
        if self.trivial {
            return Ok(self.finish());
        }
        let mut graph_changed = true;
        let mut k = 0u64;
        loop {
            if self.cfg.max_batches.is_some_and(|m| k >= m as u64) || self.model.exhausted() {
                break;
            }
            let batch = self.draw_batch(k)?;
            self.stats.saturated_batches += usize::from(batch.saturated);
            if batch.interrupted {
                break;
            }
            self.stats.samples += batch.states.len();
            graph_changed |= !batch.states.is_empty();
            self.insert_states(batch.states, Some(batch.estimates));
            self.stats.batches += 1;
            self.engine.reseed(k, graph_changed);
            graph_changed = false;
            let end = self.engine.run_batch(&mut self.model);
            self.capture_incumbents();
            match end {
                BatchEnd::OutOfTime | BatchEnd::Solved => break,
                BatchEnd::Terminated { .. } => {
                    if self.engine.prune(&mut self.model) > 0 {
                        graph_changed = true;
                        self.refresh_index();
                    }
                }
            }
            k += 1;
        }
        Ok(self.finish())
    }

    /// Searches a fixed set of states without sampling, repeating batches
    /// until one ends by the lower bound.
    pub fn run_frozen(&mut self, states: Vec<DVector<f64>>) -> Result<PlanOutcome> {
        for x in &states {
            if x.len() != self.scn.state_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.scn.state_dim(),
                    got: x.len(),
                });
            }
            if !self.scn.is_free(x.as_slice()) {
                return Err(Error::Precondition("frozen states must be valid".into()));
            }
        }
        if self.trivial {
            return Ok(self.finish());
        }
        self.stats.samples = states.len();
        self.insert_states(states, None);
        let mut graph_changed = true;
        let mut k = 0u64;
        loop {
            if self.cfg.max_batches.is_some_and(|m| k >= m as u64) {
                break;
            }
            self.stats.batches += 1;
            self.engine.reseed(k, graph_changed);
            let end = self.engine.run_batch(&mut self.model);
            self.capture_incumbents();
            match end {
                BatchEnd::Terminated { by_flag: true } => {
                    graph_changed = self.engine.prune(&mut self.model) > 0;
                    // The radius stays that of the full state set.
                }
                _ => break,
            }
            k += 1;
        }
        Ok(self.finish())
    }

    /// Copies the states of new incumbents before pruning can drop them.
    fn capture_incumbents(&mut self) {
        let e = &self.engine;
        for imp in &e.improvements[self.incumbents.len()..] {
            self.incumbents
                .push(imp.path.iter().map(|&id| e.rgg.node(id).x.clone()).collect());
        }
    }

    fn finish(&mut self) -> PlanOutcome {
        self.capture_incumbents();
        let e = &self.engine;
        let events = e
            .improvements
            .iter()
            .map(|i| AnytimeEvent {
                wall_time: i.time,
                cost: i.cost,
                batch_index: i.batch,
            })
            .collect();
        let solution = e.incumbent.as_ref().map(|path| {
            let last = e.improvements.last().expect("an incumbent has an event");
            Solution {
                cost: e.c_best,
                path: path.clone(),
                states: path.iter().map(|&id| e.rgg.node(id).x.clone()).collect(),
                time: last.time,
                batch_index: last.batch,
            }
        });
        self.stats.expansions = e.expansions;
        self.stats.pruned = e.pruned;
        self.stats.steer_calls = self.model.steer_calls;
        self.stats.edge_checks = self.model.edge_checks;
        self.stats.states_checked = self.model.states_checked;
        self.stats.elapsed = self.model.clock.elapsed();
        PlanOutcome {
            events,
            incumbents: self.incumbents.clone(),
            solution,
            stats: self.stats.clone(),
        }
    }
}

/// Plans with the bidirectional search.
pub fn plan(scn: &Scenario, cfg: &PlannerConfig) -> Result<PlanOutcome> {
    Planner::new(scn, cfg, PlannerKind::Btit)?.run()
}

/// Plans with the unidirectional baseline over the same batches.
pub fn plan_baseline(scn: &Scenario, cfg: &PlannerConfig) -> Result<PlanOutcome> {
    Planner::new(scn, cfg, PlannerKind::Baseline)?.run()
}
