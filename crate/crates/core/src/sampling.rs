//! Uniform and informed batch sampling.
//!
//! Every batch draws from its own ChaCha8 stream: the root seed selects the
//! key and the batch index selects the stream, so batch `k` of a trial is
//! the same no matter how much work earlier batches did.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::connect;
use crate::geometry::Scenario;
use crate::error::{Error, Result};

/// Consecutive invalid draws after which the free space is declared empty.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 1_000_000;
/// Average informed rejections allowed per requested sample.
pub const REJECTIONS_PER_SAMPLE: usize = 1000;

/// Generator for batch `batch_index` of the trial seeded with `seed`.
pub fn batch_rng(seed: u64, batch_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch_index);
    rng
}

/// Admissible cost estimate together with the arrival time that realises it
/// (`NaN` when the estimate does not come from steering).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub cost: f64,
    pub tau: f64,
}

impl Estimate {
    pub const UNREACHABLE: Estimate = Estimate {
        cost: f64::INFINITY,
        tau: f64::NAN,
    };
}

#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub states: Vec<DVector<f64>>,
    pub batch_index: u64,
    /// Per state: estimate from the start and estimate to the goal.
    pub estimates: Vec<[Estimate; 2]>,
    /// The rejection cap was hit before `m` states were accepted.
    pub saturated: bool,
    /// The caller's stop signal cut the batch short.
    pub interrupted: bool,
    /// Candidate states drawn, accepted or not.
    pub attempts: usize,
}

/// Uniform state over the bound box, redrawn until collision-free.
pub fn sample_uniform<R: Rng + ?Sized>(scn: &Scenario, rng: &mut R) -> Result<DVector<f64>> {
    let (lo, hi) = (scn.workspace.lower(), scn.workspace.upper());
    let mut x = DVector::zeros(lo.len());
    for _ in 0..MAX_CONSECUTIVE_REJECTIONS {
        for i in 0..lo.len() {
            x[i] = rng.gen_range(lo[i]..hi[i]);
        }
        if scn.is_free(x.as_slice()) {
            return Ok(x);
        }
    }
    Err(Error::InfeasibleSpace(MAX_CONSECUTIVE_REJECTIONS))
}

/// Steering-cost estimates from the start and to the goal.
pub fn controller_estimates(scn: &Scenario, x: &DVector<f64>) -> [Estimate; 2] {
    let est = |a: &DVector<f64>, b: &DVector<f64>| match connect(&scn.system, a, b) {
        Ok(sr) => Estimate {
            cost: sr.cost,
            tau: sr.tau_star,
        },
        Err(_) => Estimate::UNREACHABLE,
    };
    [est(&scn.start, x), est(x, &scn.goal)]
}

/// `m` valid states with `ĝ + ĥ < c_best`, using steering costs as the
/// estimates.
pub fn informed_sample<R: Rng + ?Sized>(
    scn: &Scenario,
    m: usize,
    c_best: f64,
    rng: &mut R,
    batch_index: u64,
) -> Result<SampleBatch> {
    informed_sample_with(
        m,
        c_best,
        batch_index,
        || sample_uniform(scn, rng),
        |x| controller_estimates(scn, x),
        || false,
    )
}

/// Rejection-based informed sampling over an arbitrary proposal.
///
/// `draw` proposes valid states, `estimate` scores them, and `stop` is
/// polled before every proposal.
pub fn informed_sample_with<D, E, S>(
    m: usize,
    c_best: f64,
    batch_index: u64,
    mut draw: D,
    mut estimate: E,
    mut stop: S,
) -> Result<SampleBatch>
where
    D: FnMut() -> Result<DVector<f64>>,
    E: FnMut(&DVector<f64>) -> [Estimate; 2],
    S: FnMut() -> bool,
{
    if m == 0 {
        return Err(Error::Precondition("batch size must be at least 1".into()));
    }
    let mut batch = SampleBatch {
        states: Vec::with_capacity(m),
        batch_index,
        estimates: Vec::with_capacity(m),
        saturated: false,
        interrupted: false,
        attempts: 0,
    };
    let cap = REJECTIONS_PER_SAMPLE.saturating_mul(m);
    let mut rejected = 0usize;
    while batch.states.len() < m {
        if stop() {
            batch.interrupted = true;
            break;
        }
        let x = draw()?;
        batch.attempts += 1;
        let est = estimate(&x);
        if c_best.is_infinite() || est[0].cost + est[1].cost < c_best {
            batch.states.push(x);
            batch.estimates.push(est);
        } else {
            rejected += 1;
            if rejected >= cap {
                batch.saturated = true;
                break;
            }
        }
    }
    Ok(batch)
}

/// Orthonormal basis whose first column is `axis`.
fn basis_from_axis(axis: &DVector<f64>) -> DMatrix<f64> {
    let p = axis.len();
    let mut cols: Vec<DVector<f64>> = vec![axis.normalize()];
    for e in 0..p {
        if cols.len() == p {
            break;
        }
        let mut v = DVector::zeros(p);
        v[e] = 1.0;
        for c in &cols {
            let proj = c.dot(&v);
            v -= c * proj;
        }
        if v.norm() > 1e-8 {
            cols.push(v.normalize());
        }
    }
    DMatrix::from_columns(&cols)
}

/// Direct sample from the prolate hyperspheroid
/// `rate · (‖p − p_start‖ + ‖p − p_goal‖) < c_best` over the position
/// coordinates, with the remaining coordinates uniform.
///
/// Only meaningful for the Euclidean heuristic, whose informed set is
/// exactly this ellipsoid. Falls back to uniform sampling when `c_best` is
/// infinite.
pub fn sample_prolate<R: Rng + ?Sized>(scn: &Scenario, rate: f64, c_best: f64, rng: &mut R) -> Result<DVector<f64>> {
    if !c_best.is_finite() {
        return sample_uniform(scn, rng);
    }
    let ws = &scn.workspace;
    let dims = ws.position_dims();
    let p = dims.len();
    let f1 = DVector::from_vec(ws.position(scn.start.as_slice()));
    let f2 = DVector::from_vec(ws.position(scn.goal.as_slice()));
    let c_max = c_best / rate;
    let c_min = (&f2 - &f1).norm();
    if !(c_max > c_min) {
        return Err(Error::InfeasibleSpace(0));
    }
    let centre = (&f1 + &f2) / 2.0;
    let rot = if c_min > 0.0 {
        basis_from_axis(&(&f2 - &f1))
    } else {
        DMatrix::identity(p, p)
    };
    let minor = (c_max * c_max - c_min * c_min).sqrt() / 2.0;
    let mut radii = DVector::from_element(p, minor);
    radii[0] = c_max / 2.0;

    let (lo, hi) = (ws.lower(), ws.upper());
    let mut x = DVector::zeros(lo.len());
    let mut ball = DVector::zeros(p);
    for _ in 0..MAX_CONSECUTIVE_REJECTIONS {
        loop {
            for b in ball.iter_mut() {
                *b = rng.gen_range(-1.0..1.0);
            }
            if ball.norm_squared() < 1.0 {
                break;
            }
        }
        let pos = &rot * ball.component_mul(&radii) + &centre;
        for i in 0..lo.len() {
            x[i] = rng.gen_range(lo[i]..hi[i]);
        }
        for (k, &d) in dims.iter().enumerate() {
            x[d] = pos[k];
        }
        if scn.is_free(x.as_slice()) {
            return Ok(x);
        }
    }
    Err(Error::InfeasibleSpace(MAX_CONSECUTIVE_REJECTIONS))
}
