//! Linear-system kernel: matrix exponential, weighted controllability
//! Gramian, free response and fixed-final-state free-final-time optimal
//! steering under the cost `∫ (1 + uᵀ R u) dt`.
//!
//! For `ẋ = A x + B u + c` and arrival time `τ` the minimum-effort control
//! reaching `x1` from `x0` has cost
//!
//! ```text
//! c(τ) = τ + (x1 − x̄(τ))ᵀ G(τ)⁻¹ (x1 − x̄(τ))
//! x̄(τ) = e^{Aτ} x0 + ∫₀^τ e^{A s} c ds
//! G(τ) = ∫₀^τ e^{A s} B R⁻¹ Bᵀ e^{Aᵀ s} ds
//! ```
//!
//! and steering picks the arrival time minimising `c(τ)`.

mod kernel;
mod presets;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
pub use presets::{double_integrator, quadrotor, single_integrator, Preset};

pub(crate) use kernel::{nilpotency_index, PairCost};
use kernel::Kernel;

/// Smallest arrival time considered by the steering optimiser (seconds).
pub const TAU_MIN: f64 = 1e-3;
/// Largest arrival time considered by the steering optimiser (seconds).
pub const TAU_CAP: f64 = 50.0;
/// Number of log-spaced brackets used before golden-section refinement.
pub const TAU_GRID_POINTS: usize = 64;
const TAU_REL_WIDTH: f64 = 1e-8;

/// Time-invariant affine system `ẋ = A x + B u + c` with control weight `R`.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DVector<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    kernel: Arc<Kernel>,
}

impl LinearSystem {
    /// Builds a system, checking dimensions and that `R` is symmetric
    /// positive definite.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DVector<f64>, r: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Precondition("A must be square".into()));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.nrows(),
            });
        }
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.len(),
            });
        }
        let m = b.ncols();
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: r.nrows(),
            });
        }
        if a.iter().chain(b.iter()).chain(c.iter()).chain(r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("system matrices must be finite".into()));
        }
        if (&r - r.transpose()).amax() > 1e-12 * r.amax().max(1.0) {
            return Err(Error::Precondition("R must be symmetric".into()));
        }
        let chol = r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Precondition("R must be positive definite".into()))?;
        let r_inv = chol.inverse();
        let kernel = Arc::new(Kernel::new(&a, &b, &r_inv));
        Ok(LinearSystem {
            a,
            b,
            c,
            r,
            r_inv,
            kernel,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn drift_vector(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Nilpotency index of `A` (smallest `k` with `A^k = 0`), if any.
    pub fn nilpotency_index(&self) -> Option<usize> {
        self.kernel.nilpotent
    }

    pub(crate) fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("state has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Optimal obstacle-free connection between two states.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringResult {
    /// Optimal arrival time.
    pub tau_star: f64,
    /// Minimal cost, `tau_star + (x1 − x̄)ᵀ d_vec`.
    pub cost: f64,
    pub x0: DVector<f64>,
    pub x1: DVector<f64>,
    /// `G(τ*)⁻¹ (x1 − x̄(τ*))`.
    pub d_vec: DVector<f64>,
    /// Number of cost evaluations spent by the optimiser.
    pub evaluations: usize,
}

/// Trajectory sampled at uniform times over `[0, τ*]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySamples {
    pub states: Vec<DVector<f64>>,
    pub times: Vec<f64>,
}

/// `e^{A t}`.
///
/// Nilpotent matrices use the exact finite series; everything else uses a
/// degree-8 Padé approximant with scaling and squaring.
pub fn mat_exp(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Precondition("matrix exponential needs a square matrix".into()));
    }
    if !t.is_finite() || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericDomain("non-finite input to matrix exponential".into()));
    }
    if let Some(k) = nilpotency_index(a) {
        let x = a * t;
        let mut out = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for i in 1..k {
            term = &term * &x / i as f64;
            out += &term;
        }
        return Ok(out);
    }

    let x = a * t;
    let norm = (0..n)
        .map(|j| x.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    if squarings > 1000 {
        return Err(Error::NumericDomain("matrix exponential overflow".into()));
    }
    let xs = x / 2f64.powi(squarings);

    const Q: usize = 8;
    let mut coeff = 1.0;
    let mut power = DMatrix::identity(n, n);
    let mut num = DMatrix::identity(n, n);
    let mut den = DMatrix::identity(n, n);
    for j in 1..=Q {
        coeff *= (Q - j + 1) as f64 / (j * (2 * Q - j + 1)) as f64;
        power = &power * &xs;
        num += &power * coeff;
        if j % 2 == 0 {
            den += &power * coeff;
        } else {
            den -= &power * coeff;
        }
    }
    let mut out = den
        .lu()
        .solve(&num)
        .ok_or_else(|| Error::NumericDomain("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        out = &out * &out;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericDomain("matrix exponential overflow".into()));
    }
    Ok(out)
}

/// Weighted controllability Gramian `G(t)`.
pub fn gramian(sys: &LinearSystem, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Precondition(format!("Gramian needs finite t >= 0, got {t}")));
    }
    let n = sys.state_dim();
    if t == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let kernel = sys.kernel();
    if kernel.nilpotent.is_some() {
        let mut flat = vec![0.0; n * n];
        kernel.gram_upper(t, &mut flat);
        return Ok(DMatrix::from_fn(n, n, |r, c| {
            if r <= c {
                flat[r * n + c]
            } else {
                flat[c * n + r]
            }
        }));
    }
    lyapunov_rk4(sys, t)
}

/// Integrates `Ġ = A G + G Aᵀ + B R⁻¹ Bᵀ` from zero with step-doubling RK4.
fn lyapunov_rk4(sys: &LinearSystem, t: f64) -> Result<DMatrix<f64>> {
    const TOL: f64 = 1e-10;
    let n = sys.state_dim();
    let m = &sys.b * &sys.r_inv * sys.b.transpose();
    let rhs = |g: &DMatrix<f64>| &sys.a * g + g * sys.a.transpose() + &m;
    let step = |g: &DMatrix<f64>, h: f64| {
        let k1 = rhs(g);
        let k2 = rhs(&(g + &k1 * (h / 2.0)));
        let k3 = rhs(&(g + &k2 * (h / 2.0)));
        let k4 = rhs(&(g + &k3 * h));
        g + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    };

    let mut g = DMatrix::zeros(n, n);
    let mut now = 0.0;
    let mut h = t / 16.0;
    let mut steps = 0usize;
    while now < t {
        h = h.min(t - now);
        let full = step(&g, h);
        let half = step(&step(&g, h / 2.0), h / 2.0);
        let err = (&half - &full).amax() / 15.0;
        let scale = half.amax().max(1.0);
        if err <= TOL * scale || h < 1e-12 * t {
            g = &half + (&half - &full) / 15.0;
            now += h;
            if err < TOL * scale / 64.0 {
                h *= 2.0;
            }
        } else {
            h /= 2.0;
        }
        steps += 1;
        if steps > 10_000_000 || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("Gramian integration diverged".into()));
        }
    }
    Ok((&g + g.transpose()) * 0.5)
}

/// Free response `x̄(t)` from `x0` (no control).
pub fn drift(sys: &LinearSystem, x0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    sys.check_state(x0)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Precondition(format!("drift needs finite t >= 0, got {t}")));
    }
    let n = sys.state_dim();
    let kernel = sys.kernel();
    if let Some(k) = kernel.nilpotent {
        let mut out = DVector::zeros(n);
        let mut f = 1.0;
        for i in 0..k {
            // f = t^i / i!
            out += &kernel.a_powers[i] * x0 * f;
            out += &kernel.a_powers[i] * &sys.c * (f * t / (i + 1) as f64);
            f *= t / (i + 1) as f64;
        }
        return Ok(out);
    }
    // Augmented exponential [[A, c], [0, 0]] carries the affine term.
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    aug.view_mut((0, n), (n, 1)).copy_from(&sys.c);
    let e = mat_exp(&aug, t)?;
    let mut x = DVector::zeros(n + 1);
    x.rows_mut(0, n).copy_from(x0);
    x[n] = 1.0;
    Ok((e * x).rows(0, n).into_owned())
}

/// Minimal cost of reaching exactly `x1` at exactly time `tau`.
pub fn steer_cost(sys: &LinearSystem, x0: &DVector<f64>, x1: &DVector<f64>, tau: f64) -> Result<f64> {
    sys.check_state(x0)?;
    sys.check_state(x1)?;
    if !(tau >= TAU_MIN) || !tau.is_finite() {
        return Err(Error::Precondition(format!(
            "arrival time {tau} is below the minimum {TAU_MIN}"
        )));
    }
    let mut pc = PairCost::new(sys, x0.as_slice(), x1.as_slice());
    pc.cost(tau).ok_or(Error::SingularGramian { tau })
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == points {
                hi
            } else {
                (llo + (lhi - llo) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

fn optimise_tau(pc: &mut PairCost<'_>, tau_max: f64) -> Option<f64> {
    let grid = log_grid(TAU_MIN, tau_max, TAU_GRID_POINTS);
    let values: Vec<f64> = grid
        .iter()
        .map(|&t| pc.cost(t).unwrap_or(f64::INFINITY))
        .collect();
    let (best, &best_val) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    if !best_val.is_finite() {
        return None;
    }

    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = pc.cost(x1).unwrap_or(f64::INFINITY);
    let mut f2 = pc.cost(x2).unwrap_or(f64::INFINITY);
    while hi - lo > TAU_REL_WIDTH * 0.5 * (hi + lo) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = pc.cost(x1).unwrap_or(f64::INFINITY);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = pc.cost(x2).unwrap_or(f64::INFINITY);
        }
    }
    let (refined, refined_val) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if refined_val < best_val {
        Some(refined)
    } else {
        Some(grid[best])
    }
}

/// Optimal steering with the arrival time searched over `[TAU_MIN, tau_max]`.
pub fn steer(sys: &LinearSystem, x0: &DVector<f64>, x1: &DVector<f64>, tau_max: f64) -> Result<SteeringResult> {
    sys.check_state(x0)?;
    sys.check_state(x1)?;
    if !(tau_max > TAU_MIN) || !tau_max.is_finite() {
        return Err(Error::Precondition(format!(
            "tau_max = {tau_max} must exceed {TAU_MIN}"
        )));
    }
    let mut pc = PairCost::new(sys, x0.as_slice(), x1.as_slice());
    finish_steer(&mut pc, x0, x1, tau_max)
}

fn finish_steer(pc: &mut PairCost<'_>, x0: &DVector<f64>, x1: &DVector<f64>, tau_max: f64) -> Result<SteeringResult> {
    let unsteerable = Error::Unsteerable {
        tau_min: TAU_MIN,
        tau_max,
    };
    let tau_star = optimise_tau(pc, tau_max).ok_or_else(|| unsteerable.clone())?;
    let (cost, d, _) = pc.cost_and_costate(tau_star).ok_or(unsteerable)?;
    Ok(SteeringResult {
        tau_star,
        cost,
        x0: x0.clone(),
        x1: x1.clone(),
        d_vec: DVector::from_vec(d),
        evaluations: pc.evaluations,
    })
}

/// Steering result for a fixed, already chosen arrival time.
pub fn steer_at(sys: &LinearSystem, x0: &DVector<f64>, x1: &DVector<f64>, tau: f64) -> Result<SteeringResult> {
    sys.check_state(x0)?;
    sys.check_state(x1)?;
    if !(tau >= TAU_MIN) || !tau.is_finite() {
        return Err(Error::Precondition(format!(
            "arrival time {tau} is below the minimum {TAU_MIN}"
        )));
    }
    let mut pc = PairCost::new(sys, x0.as_slice(), x1.as_slice());
    let (cost, d, _) = pc.cost_and_costate(tau).ok_or(Error::SingularGramian { tau })?;
    Ok(SteeringResult {
        tau_star: tau,
        cost,
        x0: x0.clone(),
        x1: x1.clone(),
        d_vec: DVector::from_vec(d),
        evaluations: pc.evaluations,
    })
}

/// Upper bound on the optimal arrival time used by [`connect`].
///
/// Any arrival time `τ` bounds the optimum from above through its own cost,
/// because `c(τ*) ≥ τ*`; the probe time is `2‖x1 − x0‖ + 1` seconds.
pub fn arrival_time_bound(sys: &LinearSystem, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<f64> {
    sys.check_state(x0)?;
    sys.check_state(x1)?;
    let mut pc = PairCost::new(sys, x0.as_slice(), x1.as_slice());
    Ok(probe_bound(&mut pc, x0, x1))
}

fn probe_bound(pc: &mut PairCost<'_>, x0: &DVector<f64>, x1: &DVector<f64>) -> f64 {
    let probe = (2.0 * (x1 - x0).norm() + 1.0).min(TAU_CAP);
    match pc.cost(probe) {
        Some(c) => c.min(TAU_CAP),
        None => TAU_CAP,
    }
}

/// Optimal steering with an automatically chosen arrival-time window.
pub fn connect(sys: &LinearSystem, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<SteeringResult> {
    sys.check_state(x0)?;
    sys.check_state(x1)?;
    let mut pc = PairCost::new(sys, x0.as_slice(), x1.as_slice());
    let tau_max = probe_bound(&mut pc, x0, x1);
    finish_steer(&mut pc, x0, x1, tau_max)
}

/// Closed-form evaluation of an optimal steering trajectory:
/// `x(t) = x̄(t) + G(t) e^{Aᵀ(τ−t)} d` and `u(t) = R⁻¹ Bᵀ e^{Aᵀ(τ−t)} d`.
pub struct Trajectory<'a> {
    sys: &'a LinearSystem,
    tau: f64,
    x0: DVector<f64>,
    d: DVector<f64>,
    drift_poly: Vec<Vec<f64>>,
    /// `(Aᵀ)^i d / i!`, so that `e^{Aᵀ s} d = Σ s^i costate_poly[i]`.
    costate_poly: Vec<Vec<f64>>,
    gram: Vec<f64>,
    lam: Vec<f64>,
}

impl<'a> Trajectory<'a> {
    pub fn new(sys: &'a LinearSystem, sr: &SteeringResult) -> Result<Self> {
        sys.check_state(&sr.x0)?;
        sys.check_state(&sr.x1)?;
        if sr.d_vec.len() != sys.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: sys.state_dim(),
                got: sr.d_vec.len(),
            });
        }
        if !(sr.tau_star > 0.0) || !sr.tau_star.is_finite() {
            return Err(Error::Precondition("steering result has no positive arrival time".into()));
        }
        let n = sys.state_dim();
        let kernel = sys.kernel();
        let mut drift_poly = Vec::new();
        let mut costate_poly = Vec::new();
        if let Some(k) = kernel.nilpotent {
            let pc = PairCost::new(sys, sr.x0.as_slice(), sr.x1.as_slice());
            drift_poly = pc.drift_coefficients().to_vec();
            let mut f = 1.0;
            for i in 0..k {
                if i > 0 {
                    f *= i as f64;
                }
                let v = kernel.a_powers[i].transpose() * &sr.d_vec / f;
                costate_poly.push(v.as_slice().to_vec());
            }
        }
        Ok(Trajectory {
            sys,
            tau: sr.tau_star,
            x0: sr.x0.clone(),
            d: sr.d_vec.clone(),
            drift_poly,
            costate_poly,
            gram: vec![0.0; n * n],
            lam: vec![0.0; n],
        })
    }

    pub fn duration(&self) -> f64 {
        self.tau
    }

    fn costate_into(&mut self, s: f64) -> Result<()> {
        if self.costate_poly.is_empty() {
            let e = mat_exp(&self.sys.a.transpose(), s)?;
            let v = e * &self.d;
            self.lam.copy_from_slice(v.as_slice());
        } else {
            self.lam.iter_mut().for_each(|v| *v = 0.0);
            for coeff in self.costate_poly.iter().rev() {
                for (l, c) in self.lam.iter_mut().zip(coeff) {
                    *l = *l * s + c;
                }
            }
        }
        Ok(())
    }

    /// Writes the state at time `t` into `out`.
    pub fn state_into(&mut self, t: f64, out: &mut [f64]) -> Result<()> {
        let n = self.sys.state_dim();
        self.costate_into(self.tau - t)?;
        if self.drift_poly.is_empty() {
            let xb = drift(self.sys, &self.x0, t)?;
            let g = gramian(self.sys, t)?;
            let lam = DVector::from_column_slice(&self.lam);
            let x = xb + g * lam;
            out.copy_from_slice(x.as_slice());
            return Ok(());
        }
        self.sys.kernel().gram_upper(t, &mut self.gram);
        for i in 0..n {
            let mut xb = 0.0;
            for w in self.drift_poly.iter().rev() {
                xb = xb * t + w[i];
            }
            let mut acc = 0.0;
            for j in 0..n {
                let gij = if i <= j {
                    self.gram[i * n + j]
                } else {
                    self.gram[j * n + i]
                };
                acc += gij * self.lam[j];
            }
            out[i] = xb + acc;
        }
        Ok(())
    }

    pub fn state(&mut self, t: f64) -> Result<DVector<f64>> {
        let mut out = vec![0.0; self.sys.state_dim()];
        self.state_into(t, &mut out)?;
        Ok(DVector::from_vec(out))
    }

    /// Open-loop control at time `t`.
    pub fn control(&mut self, t: f64) -> Result<DVector<f64>> {
        self.costate_into(self.tau - t)?;
        let lam = DVector::from_column_slice(&self.lam);
        Ok(&self.sys.r_inv * self.sys.b.transpose() * lam)
    }
}

/// `i`-th of `segments + 1` uniform sample times over `[0, tau]`.
///
/// Computed as `tau · (i / segments)` so that the times for `segments` are
/// bit-identical to every `k`-th time for `k · segments`.
pub fn sample_time(tau: f64, i: usize, segments: usize) -> f64 {
    tau * (i as f64 / segments as f64)
}

/// Samples the steering trajectory at `segments + 1` uniform times.
pub fn synthesize(sys: &LinearSystem, sr: &SteeringResult, segments: usize) -> Result<TrajectorySamples> {
    if segments == 0 {
        return Err(Error::Precondition("segment count must be positive".into()));
    }
    let mut traj = Trajectory::new(sys, sr)?;
    let mut states = Vec::with_capacity(segments + 1);
    let mut times = Vec::with_capacity(segments + 1);
    for i in 0..=segments {
        let t = sample_time(sr.tau_star, i, segments);
        states.push(traj.state(t)?);
        times.push(t);
    }
    Ok(TrajectorySamples { states, times })
}

#[cfg(test)]
mod tests;
