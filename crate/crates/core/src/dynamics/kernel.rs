//! Allocation-free evaluation of the steering cost for a fixed state pair.
//!
//! For nilpotent `A` every quantity the steering problem needs is a
//! polynomial in the arrival time, so the Gramian and the free response are
//! evaluated by Horner's rule from coefficients computed once per system
//! (Gramian) or once per pair (free response). Systems with non-nilpotent
//! dynamics fall back to the general routines in the parent module.

use nalgebra::{DMatrix, DVector};

use super::{drift, gramian, LinearSystem};

/// Largest acceptable condition estimate of the Jacobi-scaled Gramian.
pub(crate) const MAX_CONDITION: f64 = 1e12;

/// Precomputed per-system data.
#[derive(Debug)]
pub(crate) struct Kernel {
    pub n: usize,
    /// Nilpotency index `k` with `A^k = 0`, when it exists.
    pub nilpotent: Option<usize>,
    /// `A^0 .. A^{k-1}` for nilpotent systems, `[I]` otherwise.
    pub a_powers: Vec<DMatrix<f64>>,
    /// Flattened (row-major, upper triangle used) coefficient of `t^p` in
    /// `G(t)`, indexed by `p`. Empty for non-nilpotent systems.
    pub gram_poly: Vec<Vec<f64>>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

pub(crate) fn nilpotency_index(a: &DMatrix<f64>) -> Option<usize> {
    let n = a.nrows();
    if a.iter().all(|&v| v == 0.0) {
        return Some(1);
    }
    let mut p = a.clone();
    for k in 2..=n {
        p = &p * a;
        if p.iter().all(|&v| v == 0.0) {
            return Some(k);
        }
    }
    None
}

impl Kernel {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, r_inv: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let nilpotent = nilpotency_index(a);
        let mut a_powers = vec![DMatrix::identity(n, n)];
        let mut gram_poly = Vec::new();
        if let Some(k) = nilpotent {
            for i in 1..k {
                let next = &a_powers[i - 1] * a;
                a_powers.push(next);
            }
            let m = b * r_inv * b.transpose();
            // G(t) = sum_{i,j<k} A^i M (A^T)^j t^{i+j+1} / (i! j! (i+j+1))
            gram_poly = vec![vec![0.0; n * n]; 2 * k];
            for i in 0..k {
                let left = &a_powers[i] * &m;
                for j in 0..k {
                    let term = &left * a_powers[j].transpose();
                    let p = i + j + 1;
                    let scale = 1.0 / (factorial(i) * factorial(j) * p as f64);
                    let coeff = &mut gram_poly[p];
                    for r in 0..n {
                        for c in 0..n {
                            coeff[r * n + c] += scale * term[(r, c)];
                        }
                    }
                }
            }
        }
        Kernel {
            n,
            nilpotent,
            a_powers,
            gram_poly,
        }
    }

    /// Writes the upper triangle of `G(t)` into `out` (row-major, n×n).
    pub fn gram_upper(&self, t: f64, out: &mut [f64]) {
        let n = self.n;
        out.iter_mut().for_each(|v| *v = 0.0);
        for p in (1..self.gram_poly.len()).rev() {
            let coeff = &self.gram_poly[p];
            for r in 0..n {
                for c in r..n {
                    let idx = r * n + c;
                    out[idx] = out[idx] * t + coeff[idx];
                }
            }
        }
        for r in 0..n {
            for c in r..n {
                out[r * n + c] *= t;
            }
        }
    }
}

/// Outcome of factoring a Gramian: `None` when it is singular or too badly
/// conditioned to trust.
pub(crate) struct ScaledCholesky<'w> {
    ws: &'w mut Workspace,
}

/// Scratch buffers reused across evaluations for one pair.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    n: usize,
    pub g: Vec<f64>,
    l: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    pub residual: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Workspace {
            n,
            g: vec![0.0; n * n],
            l: vec![0.0; n * n],
            s: vec![0.0; n],
            z: vec![0.0; n],
            residual: vec![0.0; n],
        }
    }

    /// Factors the (upper-triangle) Gramian in `self.g` after symmetric
    /// diagonal scaling. Returns `None` if it is not numerically positive
    /// definite.
    pub fn factor(&mut self) -> Option<ScaledCholesky<'_>> {
        let n = self.n;
        for i in 0..n {
            let d = self.g[i * n + i];
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            self.s[i] = 1.0 / d.sqrt();
        }
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for j in 0..n {
            let mut sum = 1.0; // scaled diagonal is exactly one
            for k in 0..j {
                sum -= self.l[j * n + k] * self.l[j * n + k];
            }
            if !(sum > 0.0) {
                return None;
            }
            let ljj = sum.sqrt();
            self.l[j * n + j] = ljj;
            dmin = dmin.min(ljj);
            dmax = dmax.max(ljj);
            for i in (j + 1)..n {
                let mut v = self.g[j * n + i] * self.s[i] * self.s[j];
                for k in 0..j {
                    v -= self.l[i * n + k] * self.l[j * n + k];
                }
                self.l[i * n + j] = v / ljj;
            }
        }
        let ratio = dmax / dmin;
        if !(ratio * ratio <= MAX_CONDITION) {
            return None;
        }
        Some(ScaledCholesky { ws: self })
    }
}

impl ScaledCholesky<'_> {
    /// `r^T G^{-1} r` for `r = residual`.
    pub fn quadratic(&mut self) -> f64 {
        let ws = &mut *self.ws;
        let n = ws.n;
        let mut acc = 0.0;
        for i in 0..n {
            let mut v = ws.residual[i] * ws.s[i];
            for k in 0..i {
                v -= ws.l[i * n + k] * ws.z[k];
            }
            let zi = v / ws.l[i * n + i];
            ws.z[i] = zi;
            acc += zi * zi;
        }
        acc
    }

    /// `G^{-1} r`; call after [`ScaledCholesky::quadratic`].
    pub fn solve(&mut self) -> Vec<f64> {
        let ws = &mut *self.ws;
        let n = ws.n;
        let mut y = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = ws.z[i];
            for k in (i + 1)..n {
                v -= ws.l[k * n + i] * y[k];
            }
            y[i] = v / ws.l[i * n + i];
        }
        for i in 0..n {
            y[i] *= ws.s[i];
        }
        y
    }
}

/// Evaluates `c(tau) = tau + r^T G(tau)^{-1} r`, `r = x1 - xbar(tau)`, for a
/// fixed pair of states.
pub(crate) struct PairCost<'a> {
    sys: &'a LinearSystem,
    x0: &'a [f64],
    x1: &'a [f64],
    /// Coefficients `w_p` with `xbar(t) = sum_p w_p t^p` (nilpotent only).
    drift_poly: Vec<Vec<f64>>,
    ws: Workspace,
    pub evaluations: usize,
}

impl<'a> PairCost<'a> {
    pub fn new(sys: &'a LinearSystem, x0: &'a [f64], x1: &'a [f64]) -> Self {
        let kernel = sys.kernel();
        let n = kernel.n;
        let mut drift_poly = Vec::new();
        if let Some(k) = kernel.nilpotent {
            // w_p = (A^p x0 + A^{p-1} c) / p!
            let x0v = DVector::from_column_slice(x0);
            for p in 0..=k {
                let mut w = vec![0.0; n];
                if p < k {
                    let ax = &kernel.a_powers[p] * &x0v;
                    w.iter_mut().zip(ax.iter()).for_each(|(wi, v)| *wi += v);
                }
                if p >= 1 {
                    let ac = &kernel.a_powers[p - 1] * sys.drift_vector();
                    w.iter_mut().zip(ac.iter()).for_each(|(wi, v)| *wi += v);
                }
                let f = factorial(p);
                w.iter_mut().for_each(|wi| *wi /= f);
                drift_poly.push(w);
            }
        }
        PairCost {
            sys,
            x0,
            x1,
            drift_poly,
            ws: Workspace::new(n),
            evaluations: 0,
        }
    }

    pub fn drift_coefficients(&self) -> &[Vec<f64>] {
        &self.drift_poly
    }

    fn load(&mut self, tau: f64) -> bool {
        let kernel = self.sys.kernel();
        let n = kernel.n;
        if kernel.nilpotent.is_some() {
            kernel.gram_upper(tau, &mut self.ws.g);
            for i in 0..n {
                let mut xb = 0.0;
                for w in self.drift_poly.iter().rev() {
                    xb = xb * tau + w[i];
                }
                self.ws.residual[i] = self.x1[i] - xb;
            }
            true
        } else {
            let g = match gramian(self.sys, tau) {
                Ok(g) => g,
                Err(_) => return false,
            };
            let xb = match drift(self.sys, &DVector::from_column_slice(self.x0), tau) {
                Ok(x) => x,
                Err(_) => return false,
            };
            for r in 0..n {
                for c in 0..n {
                    self.ws.g[r * n + c] = g[(r, c)];
                }
                self.ws.residual[r] = self.x1[r] - xb[r];
            }
            true
        }
    }

    /// Cost at `tau`, or `None` when the Gramian is singular there.
    pub fn cost(&mut self, tau: f64) -> Option<f64> {
        self.evaluations += 1;
        if !self.load(tau) {
            return None;
        }
        let mut chol = self.ws.factor()?;
        let q = chol.quadratic();
        Some(tau + q)
    }

    /// Cost and `G(tau)^{-1} r` at `tau`.
    pub fn cost_and_costate(&mut self, tau: f64) -> Option<(f64, Vec<f64>, Vec<f64>)> {
        self.evaluations += 1;
        if !self.load(tau) {
            return None;
        }
        let residual = self.ws.residual.clone();
        let mut chol = self.ws.factor()?;
        let q = chol.quadratic();
        let d = chol.solve();
        Some((tau + q, d, residual))
    }
}
