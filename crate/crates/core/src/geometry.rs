//! Workspace bounds, box obstacles, state and edge validity, and scenario
//! files.
//!
//! A scenario is a single JSON document:
//!
//! ```json
//! {
//!   "schema": 1,
//!   "name": "corridor",
//!   "system": "dir4d",
//!   "bounds": { "lower": [0, 0, -2, -2], "upper": [14, 8, 2, 2] },
//!   "position_dims": [0, 1],
//!   "obstacles": [ { "min": [5, 0], "max": [5.4, 6] } ],
//!   "start": [1, 1, 0, 0],
//!   "goal": [12, 7, 0, 0],
//!   "radius_gamma": 1.2
//! }
//! ```
//!
//! `radius_gamma` is optional. Obstacles live in the coordinates listed by
//! `position_dims` and are closed: touching a face counts as a collision.

use std::fmt;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{sample_time, LinearSystem, Preset, SteeringResult, Trajectory};
use crate::error::{Error, Result};

/// Current scenario file format version.
pub const SCHEMA_VERSION: u32 = 1;
/// Default number of trajectory segments checked per edge.
pub const DEFAULT_SEGMENTS: usize = 200;

/// Environment variable naming an extra directory of scenario files.
pub const SCENARIO_DIR_ENV: &str = "BTIT_SCENARIO_DIR";

const BUNDLED: &[(&str, &str)] = &[
    ("dir4d_lab", include_str!("../scenarios/dir4d_lab.json")),
    ("dir4d_open", include_str!("../scenarios/dir4d_open.json")),
    ("lq10d_lab2", include_str!("../scenarios/lq10d_lab2.json")),
];

/// Per-dimension state bounds plus the indices of the position coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Workspace {
    lower: Vec<f64>,
    upper: Vec<f64>,
    position_dims: Vec<usize>,
}

impl Workspace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, position_dims: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::invalid(
                "bounds.upper",
                format!("has {} entries, bounds.lower has {}", upper.len(), lower.len()),
            ));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::invalid(
                    format!("bounds[{i}]"),
                    format!("need finite lower < upper, got [{lo}, {hi}]"),
                ));
            }
        }
        if position_dims.is_empty() {
            return Err(Error::invalid("position_dims", "must not be empty"));
        }
        for (k, &p) in position_dims.iter().enumerate() {
            if p >= lower.len() {
                return Err(Error::invalid(
                    "position_dims",
                    format!("index {p} out of range for a {}-D state", lower.len()),
                ));
            }
            if position_dims[..k].contains(&p) {
                return Err(Error::invalid("position_dims", format!("index {p} repeated")));
            }
        }
        Ok(Workspace {
            lower,
            upper,
            position_dims,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn position_dims(&self) -> &[usize] {
        &self.position_dims
    }

    /// Inclusive bounds test.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Maps `x` affinely so that the bound box becomes `[0, 1]^n`.
    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = (x[i] - self.lower[i]) / (self.upper[i] - self.lower[i]);
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.normalize_into(x, &mut out);
        out
    }

    /// Position coordinates of `x`.
    pub fn position(&self, x: &[f64]) -> Vec<f64> {
        self.position_dims.iter().map(|&i| x[i]).collect()
    }
}

/// Closed axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Aabb {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                got: max.len(),
            });
        }
        if min
            .iter()
            .zip(&max)
            .any(|(a, b)| !a.is_finite() || !b.is_finite() || a >= b)
        {
            return Err(Error::invalid("obstacle", "need finite min < max in every coordinate"));
        }
        Ok(Aabb { min, max })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObstacleSet {
    pub boxes: Vec<Aabb>,
}

impl ObstacleSet {
    pub fn new(boxes: Vec<Aabb>) -> Self {
        ObstacleSet { boxes }
    }

    /// True when `state` projected onto `dims` touches any box.
    pub fn collides(&self, state: &[f64], dims: &[usize]) -> bool {
        self.boxes.iter().any(|b| {
            dims.iter()
                .zip(b.min.iter().zip(&b.max))
                .all(|(&d, (lo, hi))| state[d] >= *lo && state[d] <= *hi)
        })
    }
}

/// A planning problem: system, workspace, obstacles, start and goal.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub preset: Preset,
    pub system: LinearSystem,
    pub workspace: Workspace,
    pub obstacles: ObstacleSet,
    pub start: DVector<f64>,
    pub goal: DVector<f64>,
    /// Override for the connection-radius constant.
    pub radius_gamma: Option<f64>,
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.preset == other.preset
            && self.workspace == other.workspace
            && self.obstacles == other.obstacles
            && self.start == other.start
            && self.goal == other.goal
            && self.radius_gamma == other.radius_gamma
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}, {} obstacles)",
            self.name,
            self.preset,
            self.obstacles.boxes.len()
        )
    }
}

impl Scenario {
    /// Builds and validates a scenario.
    pub fn new(
        name: impl Into<String>,
        preset: Preset,
        workspace: Workspace,
        obstacles: ObstacleSet,
        start: DVector<f64>,
        goal: DVector<f64>,
        radius_gamma: Option<f64>,
    ) -> Result<Self> {
        let n = preset.state_dim();
        if workspace.dim() != n {
            return Err(Error::invalid(
                "bounds",
                format!("{}-D bounds for the {}-D system {preset}", workspace.dim(), n),
            ));
        }
        let pd = workspace.position_dims().len();
        for (i, b) in obstacles.boxes.iter().enumerate() {
            if b.min.len() != pd || b.max.len() != pd {
                return Err(Error::invalid(
                    format!("obstacles[{i}]"),
                    format!("corners must have {pd} coordinates"),
                ));
            }
            if b.min.iter().zip(&b.max).any(|(a, c)| !a.is_finite() || !c.is_finite() || a >= c) {
                return Err(Error::invalid(
                    format!("obstacles[{i}]"),
                    "need finite min < max in every coordinate",
                ));
            }
        }
        if let Some(g) = radius_gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::invalid("radius_gamma", "must be positive and finite"));
            }
        }
        let scn = Scenario {
            name: name.into(),
            preset,
            system: preset.system(),
            workspace,
            obstacles,
            start,
            goal,
            radius_gamma,
        };
        for (field, x) in [("start", &scn.start), ("goal", &scn.goal)] {
            if x.len() != n {
                return Err(Error::invalid(field, format!("has {} entries, expected {n}", x.len())));
            }
            if !scn.workspace.contains(x.as_slice()) {
                return Err(Error::invalid(field, "outside the state bounds"));
            }
            if scn.obstacles.collides(x.as_slice(), scn.workspace.position_dims()) {
                return Err(Error::invalid(field, "inside an obstacle"));
            }
        }
        Ok(scn)
    }

    pub fn state_dim(&self) -> usize {
        self.workspace.dim()
    }

    /// Bounds and obstacle test on a raw slice of the right length.
    pub fn is_free(&self, x: &[f64]) -> bool {
        self.workspace.contains(x) && !self.obstacles.collides(x, self.workspace.position_dims())
    }

    /// Parses and validates a scenario from JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_scenario()
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            schema: SCHEMA_VERSION,
            name: self.name.clone(),
            system: self.preset.name().to_string(),
            bounds: Bounds {
                lower: self.workspace.lower.clone(),
                upper: self.workspace.upper.clone(),
            },
            position_dims: self.workspace.position_dims.clone(),
            obstacles: self.obstacles.boxes.clone(),
            start: self.start.as_slice().to_vec(),
            goal: self.goal.as_slice().to_vec(),
            radius_gamma: self.radius_gamma,
        };
        serde_json::to_string_pretty(&file).expect("scenario serialises")
    }

    /// Copy with a different start and goal, revalidated.
    pub fn with_endpoints(&self, start: DVector<f64>, goal: DVector<f64>) -> Result<Self> {
        Scenario::new(
            self.name.clone(),
            self.preset,
            self.workspace.clone(),
            self.obstacles.clone(),
            start,
            goal,
            self.radius_gamma,
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema: u32,
    name: String,
    system: String,
    bounds: Bounds,
    position_dims: Vec<usize>,
    #[serde(default)]
    obstacles: Vec<Aabb>,
    start: Vec<f64>,
    goal: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius_gamma: Option<f64>,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema),
            ));
        }
        let preset: Preset = self
            .system
            .parse()
            .map_err(|_| Error::invalid("system", format!("unknown system `{}`", self.system)))?;
        let workspace = Workspace::new(self.bounds.lower, self.bounds.upper, self.position_dims)?;
        Scenario::new(
            self.name,
            preset,
            workspace,
            ObstacleSet::new(self.obstacles),
            DVector::from_vec(self.start),
            DVector::from_vec(self.goal),
            self.radius_gamma,
        )
    }
}

/// True iff `x` is within bounds and its position touches no obstacle.
pub fn state_valid(scn: &Scenario, x: &DVector<f64>) -> Result<bool> {
    if x.len() != scn.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: scn.state_dim(),
            got: x.len(),
        });
    }
    Ok(scn.is_free(x.as_slice()))
}

/// Checks the steering trajectory at `segments + 1` uniform times.
pub fn edge_valid(scn: &Scenario, sr: &SteeringResult, segments: usize) -> Result<bool> {
    check_edge(scn, sr, segments).map(|(ok, _)| ok)
}

/// Edge check that also reports how many states were tested.
///
/// Coarse samples (every 16th) are tested before the rest; the verdict does
/// not depend on the order.
pub(crate) fn check_edge(scn: &Scenario, sr: &SteeringResult, segments: usize) -> Result<(bool, usize)> {
    if segments == 0 {
        return Err(Error::Precondition("segment count must be positive".into()));
    }
    let mut traj = Trajectory::new(&scn.system, sr)?;
    let mut buf = vec![0.0; scn.state_dim()];
    let mut checked = 0;
    const STRIDE: usize = 16;
    for pass in 0..2 {
        for i in 0..=segments {
            if (i % STRIDE == 0) != (pass == 0) {
                continue;
            }
            traj.state_into(sample_time(sr.tau_star, i, segments), &mut buf)?;
            checked += 1;
            if !scn.is_free(&buf) {
                return Ok((false, checked));
            }
        }
    }
    Ok((true, checked))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Scenario::from_json(&text)
}

pub fn save_scenario(scn: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scn.to_json() + "\n").map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Names of the scenarios compiled into the library.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Option<Scenario> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_json(text).expect("bundled scenarios are valid"))
}

/// Resolves a scenario by file path, then by name in the directory named by
/// `BTIT_SCENARIO_DIR`, then among the bundled scenarios.
pub fn resolve_scenario(name_or_path: &str) -> Result<Scenario> {
    let direct = Path::new(name_or_path);
    if direct.is_file() {
        return load_scenario(direct);
    }
    if let Ok(dir) = std::env::var(SCENARIO_DIR_ENV) {
        let candidate = Path::new(&dir).join(format!("{name_or_path}.json"));
        if candidate.is_file() {
            return load_scenario(candidate);
        }
    }
    bundled(name_or_path).ok_or_else(|| Error::Unknown(name_or_path.to_string()))
}
