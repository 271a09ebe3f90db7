use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::LinearSystem;
use crate::error::Error;

const GRAVITY: f64 = 9.81;
const QUAD_MASS: f64 = 0.5;
const QUAD_ARM: f64 = 0.1725;
const QUAD_INERTIA: f64 = 0.0117;

/// `dims` decoupled double integrators: state `[position; velocity]`,
/// control is acceleration, `R = I`.
pub fn double_integrator(dims: usize) -> LinearSystem {
    let n = 2 * dims;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, dims);
    for i in 0..dims {
        a[(i, dims + i)] = 1.0;
        b[(dims + i, i)] = 1.0;
    }
    LinearSystem::new(a, b, DVector::zeros(n), DMatrix::identity(dims, dims))
        .expect("double integrator is well formed")
}

/// `dims` single integrators with control weight `weight·I`.
pub fn single_integrator(dims: usize, weight: f64) -> LinearSystem {
    LinearSystem::new(
        DMatrix::zeros(dims, dims),
        DMatrix::identity(dims, dims),
        DVector::zeros(dims),
        DMatrix::identity(dims, dims) * weight,
    )
    .expect("single integrator is well formed")
}

/// Quadrotor linearised about hover.
///
/// State `[l (3), v (3), r (2), w (2)]`: position, velocity, roll/pitch and
/// their rates. Controls are collective thrust deviation and the two
/// attitude torques.
pub fn quadrotor() -> LinearSystem {
    let mut a = DMatrix::zeros(10, 10);
    for i in 0..3 {
        a[(i, 3 + i)] = 1.0;
    }
    // small-angle tilt accelerates horizontally
    a[(3, 7)] = GRAVITY;
    a[(4, 6)] = -GRAVITY;
    a[(6, 8)] = 1.0;
    a[(7, 9)] = 1.0;

    let mut b = DMatrix::zeros(10, 3);
    b[(5, 0)] = 1.0 / QUAD_MASS;
    b[(8, 1)] = QUAD_ARM / QUAD_INERTIA;
    b[(9, 2)] = QUAD_ARM / QUAD_INERTIA;

    LinearSystem::new(a, b, DVector::zeros(10), DMatrix::identity(3, 3))
        .expect("quadrotor is well formed")
}

/// Named systems that scenario files may refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Planar double integrator, 4-D state.
    Dir4d,
    /// Linearised quadrotor, 10-D state.
    Lq10d,
    /// Planar single integrator with unit control weight, 2-D state.
    Si2d,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Dir4d => "dir4d",
            Preset::Lq10d => "lq10d",
            Preset::Si2d => "si2d",
        }
    }

    pub fn system(self) -> LinearSystem {
        match self {
            Preset::Dir4d => double_integrator(2),
            Preset::Lq10d => quadrotor(),
            Preset::Si2d => single_integrator(2, 1.0),
        }
    }

    pub fn state_dim(self) -> usize {
        match self {
            Preset::Dir4d => 4,
            Preset::Lq10d => 10,
            Preset::Si2d => 2,
        }
    }

    /// Cost per metre of straight-line position distance used by the
    /// Euclidean heuristic: the reciprocal of the top speed allowed by the
    /// preset's velocity bounds, or the exact rate for the single
    /// integrator (`2·sqrt(weight)`).
    pub fn euclidean_rate(self) -> f64 {
        match self {
            Preset::Dir4d => 1.0 / (2.0 * 2f64.sqrt()),
            Preset::Lq10d => 1.0 / (2.5 * 3f64.sqrt()),
            Preset::Si2d => 2.0,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dir4d" => Ok(Preset::Dir4d),
            "lq10d" => Ok(Preset::Lq10d),
            "si2d" => Ok(Preset::Si2d),
            other => Err(Error::Unknown(other.to_string())),
        }
    }
}
