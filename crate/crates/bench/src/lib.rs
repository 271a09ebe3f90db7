//! Seeded multi-trial runs and their CSV reports.
//!
//! A run of `N` trials uses seeds `seed, seed + 1, …, seed + N − 1`. Trials
//! may execute in parallel but rows are always written in seed order, so
//! the files depend only on the configuration.
//!
//! Two files are produced:
//!
//! * events: `planner,scenario,seed,batch,wall_time_s,cost`, one row per
//!   incumbent improvement;
//! * summary: `planner,scenario,seed,first_solution_s,final_cost,success`,
//!   one row per trial, with empty time and cost when no solution was found.
//!
//! Times are the planner clock rounded to microseconds. Floats use the
//! shortest representation that parses back to the same value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use btit::search::{PlanOutcome, Planner, PlannerConfig, PlannerKind};
use btit::Scenario;
use rayon::prelude::*;
use serde::Deserialize;

pub const EVENTS_HEADER: [&str; 6] = ["planner", "scenario", "seed", "batch", "wall_time_s", "cost"];
pub const SUMMARY_HEADER: [&str; 6] = ["planner", "scenario", "seed", "first_solution_s", "final_cost", "success"];

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Planner(#[from] btit::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: expected column `{expected}` at position {position}, found `{found}`")]
    Schema {
        path: String,
        expected: String,
        position: usize,
        found: String,
    },
    #[error("--jobs must be at least 1")]
    Jobs,
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub planner: PlannerKind,
    pub scenario: String,
    pub seed: u64,
    pub outcome: PlanOutcome,
}

impl Trial {
    pub fn success(&self) -> bool {
        self.outcome.solution.is_some()
    }
}

/// Runs `trials` seeded trials on at most `jobs` threads, in seed order.
pub fn run_trials(
    scn: &Scenario,
    planner: PlannerKind,
    cfg: &PlannerConfig,
    trials: u64,
    jobs: usize,
) -> Result<Vec<Trial>> {
    if jobs == 0 {
        return Err(BenchError::Jobs);
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    let seeds: Vec<u64> = (0..trials).map(|i| cfg.seed.wrapping_add(i)).collect();
    let results: Vec<btit::Result<Trial>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let cfg = PlannerConfig { seed, ..cfg.clone() };
                let outcome = Planner::new(scn, &cfg, planner)?.run()?;
                Ok(Trial {
                    planner,
                    scenario: scn.name.clone(),
                    seed,
                    outcome,
                })
            })
            .collect()
    });
    results.into_iter().map(|r| r.map_err(BenchError::from)).collect()
}

/// Rounds a clock reading to whole microseconds.
pub fn quantize(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn float(x: f64) -> String {
    format!("{x}")
}

pub fn write_events<W: Write>(trials: &[Trial], w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(EVENTS_HEADER)?;
    for t in trials {
        for e in &t.outcome.events {
            out.write_record([
                t.planner.name().to_string(),
                t.scenario.clone(),
                t.seed.to_string(),
                e.batch_index.to_string(),
                float(quantize(e.wall_time)),
                float(e.cost),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(trials: &[Trial], w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for t in trials {
        let opt = |x: Option<f64>| x.map(float).unwrap_or_default();
        out.write_record([
            t.planner.name().to_string(),
            t.scenario.clone(),
            t.seed.to_string(),
            opt(t.outcome.first_solution_time().map(quantize)),
            opt(t.outcome.final_cost()),
            t.success().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `events.csv` and `summary.csv` into `dir`, creating it if needed.
pub fn write_reports(trials: &[Trial], dir: &Path) -> Result<()> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| BenchError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, write) in [
        ("events.csv", write_events as fn(&[Trial], std::fs::File) -> csv::Result<()>),
        ("summary.csv", write_summary),
    ] {
        let path = dir.join(name);
        let file = std::fs::File::create(&path).map_err(io(&path))?;
        write(trials, file).map_err(|source| BenchError::Csv {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// One row of a summary file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct SummaryRow {
    pub planner: String,
    pub scenario: String,
    pub seed: u64,
    pub first_solution_s: Option<f64>,
    pub final_cost: Option<f64>,
    pub success: bool,
}

/// Reads summary rows, checking the header column by column.
pub fn read_summary<R: Read>(r: R, path: &str) -> Result<Vec<SummaryRow>> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_string(),
        source,
    };
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    for (position, expected) in SUMMARY_HEADER.iter().enumerate() {
        let found = header.get(position).unwrap_or("");
        if found != *expected {
            return Err(BenchError::Schema {
                path: path.to_string(),
                expected: expected.to_string(),
                position,
                found: found.to_string(),
            });
        }
    }
    if let Some(extra) = header.get(SUMMARY_HEADER.len()) {
        return Err(BenchError::Schema {
            path: path.to_string(),
            expected: "<end of header>".into(),
            position: SUMMARY_HEADER.len(),
            found: extra.to_string(),
        });
    }
    rdr.deserialize().collect::<csv::Result<Vec<_>>>().map_err(csv_err)
}

pub fn read_summary_file(path: &Path) -> Result<Vec<SummaryRow>> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| BenchError::Io {
        path: name.clone(),
        source,
    })?;
    read_summary(file, &name)
}

/// Median by sorting; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Aggregate of one planner on one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSummary {
    pub planner: String,
    pub scenario: String,
    pub trials: usize,
    pub successes: usize,
    /// Over successful trials only.
    pub median_first_solution_s: Option<f64>,
    pub median_final_cost: Option<f64>,
}

impl GroupSummary {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Median first-solution time of `slower` divided by that of `faster`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeedRatio {
    pub scenario: String,
    pub faster: String,
    pub slower: String,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    pub ratios: Vec<SpeedRatio>,
}

/// Groups rows by planner and scenario. A trial succeeds when it reports a
/// finite final cost.
pub fn summarize(rows: &[SummaryRow]) -> Summary {
    let mut by_group: BTreeMap<(String, String), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        by_group
            .entry((r.scenario.clone(), r.planner.clone()))
            .or_default()
            .push(r);
    }
    let groups: Vec<GroupSummary> = by_group
        .into_iter()
        .map(|((scenario, planner), rows)| {
            let ok: Vec<&&SummaryRow> = rows
                .iter()
                .filter(|r| r.success && r.final_cost.is_some_and(f64::is_finite))
                .collect();
            let times: Vec<f64> = ok.iter().filter_map(|r| r.first_solution_s).collect();
            let costs: Vec<f64> = ok.iter().filter_map(|r| r.final_cost).collect();
            GroupSummary {
                planner,
                scenario,
                trials: rows.len(),
                successes: ok.len(),
                median_first_solution_s: median(&times),
                median_final_cost: median(&costs),
            }
        })
        .collect();
    let mut ratios = Vec::new();
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            if a.scenario != b.scenario {
                continue;
            }
            let (Some(ta), Some(tb)) = (a.median_first_solution_s, b.median_first_solution_s) else {
                continue;
            };
            let (faster, slower, ratio) = if ta <= tb { (a, b, tb / ta) } else { (b, a, ta / tb) };
            ratios.push(SpeedRatio {
                scenario: a.scenario.clone(),
                faster: faster.planner.clone(),
                slower: slower.planner.clone(),
                ratio,
            });
        }
    }
    Summary { groups, ratios }
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Plain-text table of a summary.
pub fn render(summary: &Summary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:<10} {:>7} {:>9} {:>14} {:>12}",
        "scenario", "planner", "trials", "success", "median first", "median cost"
    );
    for g in &summary.groups {
        let _ = writeln!(
            s,
            "{:<16} {:<10} {:>7} {:>8.1}% {:>14} {:>12}",
            g.scenario,
            g.planner,
            g.trials,
            100.0 * g.success_rate(),
            cell(g.median_first_solution_s),
            cell(g.median_final_cost)
        );
    }
    for r in &summary.ratios {
        let _ = writeln!(
            s,
            "{}: {} finds its first solution {:.2}x faster than {} (median)",
            r.scenario, r.faster, r.ratio, r.slower
        );
    }
    s
}
