use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Scaled Taylor series with a fixed number of terms, then repeated squaring.
fn taylor_exp(a: &DMatrix<f64>, t: f64, terms: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let x = a * t;
    let norm = x.amax() * n as f64;
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let xs = x / 2f64.powi(s);
    let mut out = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for i in 1..terms {
        term = &term * &xs / i as f64;
        out += &term;
    }
    for _ in 0..s {
        out = &out * &out;
    }
    out
}

/// Fixed-step RK4 on the Lyapunov equation.
fn lyapunov_oracle(sys: &LinearSystem, t: f64, steps: usize) -> DMatrix<f64> {
    let m = sys.b() * sys.r().clone().try_inverse().unwrap() * sys.b().transpose();
    let a = sys.a();
    let f = |g: &DMatrix<f64>| a * g + g * a.transpose() + &m;
    let h = t / steps as f64;
    let mut g = DMatrix::zeros(a.nrows(), a.nrows());
    for _ in 0..steps {
        let k1 = f(&g);
        let k2 = f(&(&g + &k1 * (h / 2.0)));
        let k3 = f(&(&g + &k2 * (h / 2.0)));
        let k4 = f(&(&g + &k3 * h));
        g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    g
}

fn rk4_free(sys: &LinearSystem, x0: &DVector<f64>, t: f64, h: f64) -> DVector<f64> {
    let f = |x: &DVector<f64>| sys.a() * x + sys.drift_vector();
    let steps = (t / h).round() as usize;
    let h = t / steps as f64;
    let mut x = x0.clone();
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (h / 2.0)));
        let k3 = f(&(&x + &k2 * (h / 2.0)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

fn random_in(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> DVector<f64> {
    DVector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(l, h)| rng.gen_range(*l..*h)))
}

/// Closed-form cost of a 1-D double integrator leg, summed over axes.
fn di_cost_oracle(x0: &[f64], x1: &[f64], tau: f64) -> f64 {
    let dims = x0.len() / 2;
    let g = DMatrix::from_row_slice(2, 2, &[tau.powi(3) / 3.0, tau * tau / 2.0, tau * tau / 2.0, tau]);
    let g_inv = g.try_inverse().unwrap();
    let mut cost = tau;
    for k in 0..dims {
        let (p0, v0) = (x0[k], x0[dims + k]);
        let r = dvec(&[x1[k] - (p0 + v0 * tau), x1[dims + k] - v0]);
        cost += (r.transpose() * &g_inv * &r)[(0, 0)];
    }
    cost
}

fn grid_oracle(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let n = 10_000;
    let mut best = (lo, f(lo));
    for i in 0..=n {
        let t = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    // local refinement on successively finer uniform grids
    let mut width = (hi - lo) / n as f64;
    for _ in 0..6 {
        let (a, b) = ((best.0 - width).max(lo), (best.0 + width).min(hi));
        for i in 0..=200 {
            let t = a + (b - a) * i as f64 / 200.0;
            let v = f(t);
            if v < best.1 {
                best = (t, v);
            }
        }
        width /= 50.0;
    }
    best
}

#[test]
fn mat_exp_of_zero_is_identity() {
    for n in 1..5 {
        let e = mat_exp(&DMatrix::zeros(n, n), 5.0).unwrap();
        assert_eq!(e, DMatrix::identity(n, n));
    }
}

#[test]
fn mat_exp_double_integrator_is_two_term_series() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let e = mat_exp(&a, 2.0).unwrap();
    assert_eq!(e, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
}

#[test]
fn mat_exp_matches_taylor_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let a = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-2.0..2.0));
        let got = mat_exp(&a, 0.7).unwrap();
        let want = taylor_exp(&a, 0.7, 60);
        let rel = (&got - &want).amax() / want.amax();
        assert!(rel <= 1e-10, "relative error {rel}");
    }
}

#[test]
fn mat_exp_rejects_non_finite() {
    let a = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
    assert!(matches!(mat_exp(&a, 1.0), Err(Error::NumericDomain(_))));
    let a = DMatrix::from_row_slice(1, 1, &[1e300]);
    assert!(matches!(mat_exp(&a, 1e10), Err(Error::NumericDomain(_))));
}

#[test]
fn nilpotent_presets_are_detected() {
    assert_eq!(double_integrator(2).nilpotency_index(), Some(2));
    assert_eq!(quadrotor().nilpotency_index(), Some(4));
    assert_eq!(single_integrator(2, 1.0).nilpotency_index(), Some(1));
}

#[test]
fn gramian_at_zero_is_zero() {
    let sys = quadrotor();
    assert_eq!(gramian(&sys, 0.0).unwrap(), DMatrix::zeros(10, 10));
    assert!(matches!(gramian(&sys, -1.0), Err(Error::Precondition(_))));
}

#[test]
fn gramian_double_integrator_closed_form() {
    let sys = double_integrator(1);
    let g = gramian(&sys, 1.0).unwrap();
    let want = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 0.5, 0.5, 1.0]);
    assert!((&g - &want).amax() <= 1e-12);

    // fixed-step Simpson quadrature of [s, 1]^T [s, 1]
    let n = 2000;
    let mut q = DMatrix::zeros(2, 2);
    for i in 0..=n {
        let s = i as f64 / n as f64;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let v = dvec(&[s, 1.0]);
        q += &v * v.transpose() * w;
    }
    q /= 3.0 * n as f64;
    assert!((&g - &q).amax() <= 1e-10);
}

#[test]
fn gramian_quadrotor_matches_lyapunov_integration() {
    let sys = quadrotor();
    let g = gramian(&sys, 0.5).unwrap();
    let oracle = lyapunov_oracle(&sys, 0.5, 20_000);
    let err = (&g - &oracle).amax();
    assert!(err <= 1e-8, "max abs error {err}");
}

#[test]
fn gramian_general_path_matches_lyapunov_integration() {
    // damped oscillator: not nilpotent, so the adaptive integrator runs
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.3]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let sys = LinearSystem::new(a, b, dvec(&[0.0, 0.5]), DMatrix::identity(1, 1) * 0.5).unwrap();
    assert_eq!(sys.nilpotency_index(), None);
    let g = gramian(&sys, 1.3).unwrap();
    let oracle = lyapunov_oracle(&sys, 1.3, 20_000);
    assert!((&g - &oracle).amax() <= 1e-9);
    assert!((&g - g.transpose()).amax() <= 1e-10 * g.amax());
}

#[test]
fn drift_examples() {
    let sys = single_integrator(3, 1.0);
    let x0 = dvec(&[1.0, -2.0, 3.0]);
    for t in [0.0, 0.5, 7.0] {
        assert_eq!(drift(&sys, &x0, t).unwrap(), x0);
    }
    let sys = double_integrator(1);
    assert_eq!(drift(&sys, &dvec(&[0.0, 1.0]), 2.0).unwrap(), dvec(&[2.0, 1.0]));
}

#[test]
fn drift_quadrotor_matches_rk4() {
    let sys = quadrotor();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x0 = DVector::from_fn(10, |_, _| rng.gen_range(-1.0..1.0));
    let got = drift(&sys, &x0, 0.3).unwrap();
    let want = rk4_free(&sys, &x0, 0.3, 1e-4);
    assert!((&got - &want).amax() <= 1e-8);
}

#[test]
fn drift_with_affine_term_matches_rk4() {
    let a = DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, -1.0, -0.2]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let sys = LinearSystem::new(a, b, dvec(&[0.3, -0.7]), DMatrix::identity(1, 1)).unwrap();
    let x0 = dvec(&[1.0, 2.0]);
    let got = drift(&sys, &x0, 1.7).unwrap();
    let want = rk4_free(&sys, &x0, 1.7, 1e-4);
    assert!((&got - &want).amax() <= 1e-9);
}

#[test]
fn steer_cost_equilibrium_is_tau() {
    let sys = double_integrator(2);
    let x = dvec(&[3.0, 1.0, 0.0, 0.0]);
    for tau in [TAU_MIN, 0.1, 1.0, 7.5] {
        assert_relative_eq!(steer_cost(&sys, &x, &x, tau).unwrap(), tau, max_relative = 1e-12);
    }
}

#[test]
fn steer_cost_double_integrator_unit_move() {
    let sys = double_integrator(1);
    let c = steer_cost(&sys, &dvec(&[0.0, 0.0]), &dvec(&[1.0, 0.0]), 1.0).unwrap();
    assert_relative_eq!(c, 13.0, max_relative = 1e-12);
    assert_relative_eq!(c, di_cost_oracle(&[0.0, 0.0], &[1.0, 0.0], 1.0), max_relative = 1e-12);
}

#[test]
fn steer_cost_below_tau_min_is_rejected() {
    let sys = double_integrator(1);
    let x = dvec(&[0.0, 0.0]);
    assert!(matches!(steer_cost(&sys, &x, &x, 1e-4), Err(Error::Precondition(_))));
}

/// Direct transcription: zero-order-hold controls on `steps` intervals,
/// minimum-effort solution of the terminal constraint via the discrete
/// Gramian.
fn transcription_oracle(sys: &LinearSystem, x0: &DVector<f64>, x1: &DVector<f64>, tau: f64, steps: usize) -> f64 {
    let n = sys.state_dim();
    let h = tau / steps as f64;
    let phi = taylor_exp(sys.a(), h, 30);
    // Γ = ∫₀ʰ e^{As} ds B via midpoint-refined Simpson on the exponential
    let sub = 8;
    let mut integral = DMatrix::zeros(n, n);
    for i in 0..=sub {
        let s = h * i as f64 / sub as f64;
        let w = if i == 0 || i == sub { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        integral += taylor_exp(sys.a(), s, 30) * w;
    }
    integral *= h / (3.0 * sub as f64);
    let gamma = &integral * sys.b();
    let affine = &integral * sys.drift_vector();
    let w_inv = sys.r().clone().try_inverse().unwrap() / h;

    let mut free = x0.clone();
    let mut gd = DMatrix::zeros(n, n);
    let mut reach = DMatrix::identity(n, n);
    for _ in 0..steps {
        free = &phi * free + &affine;
    }
    // sum_k Φ^{N-1-k} Γ W⁻¹ Γᵀ Φ^{N-1-k,T}
    let core = &gamma * &w_inv * gamma.transpose();
    for _ in 0..steps {
        gd += &reach * &core * reach.transpose();
        reach = &reach * &phi;
    }
    let r = x1 - free;
    tau + (r.transpose() * gd.try_inverse().unwrap() * &r)[(0, 0)]
}

#[test]
fn steer_cost_matches_transcription_oracle() {
    let sys = double_integrator(2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let x0 = random_in(&mut rng, &[0.0, 0.0, -2.0, -2.0], &[4.0, 4.0, 2.0, 2.0]);
        let x1 = random_in(&mut rng, &[0.0, 0.0, -2.0, -2.0], &[4.0, 4.0, 2.0, 2.0]);
        let c = steer_cost(&sys, &x0, &x1, 0.8).unwrap();
        let oracle = transcription_oracle(&sys, &x0, &x1, 0.8, 2000);
        assert_relative_eq!(c, oracle, max_relative = 1e-3);
    }
}

#[test]
fn steer_equilibrium_takes_minimum_time() {
    let sys = double_integrator(2);
    let x = dvec(&[1.0, 1.0, 0.0, 0.0]);
    let sr = steer(&sys, &x, &x, 5.0).unwrap();
    assert_eq!(sr.tau_star, TAU_MIN);
    assert_relative_eq!(sr.cost, TAU_MIN, max_relative = 1e-12);
}

#[test]
fn steer_matches_dense_grid_oracle() {
    let sys = double_integrator(1);
    let (x0, x1) = ([0.0, 0.0], [1.0, 0.0]);
    let sr = steer(&sys, &dvec(&x0), &dvec(&x1), 10.0).unwrap();
    let (_, best) = grid_oracle(|t| di_cost_oracle(&x0, &x1, t), TAU_MIN, 10.0);
    assert_relative_eq!(sr.cost, best, max_relative = 1e-6);
    // analytic optimum for rest-to-rest: tau = (36)^(1/4) = sqrt(6)
    assert_relative_eq!(sr.tau_star, 6f64.sqrt(), max_relative = 1e-6);
}

#[test]
fn steer_cost_is_minimal_over_grid() {
    let sys = double_integrator(2);
    let (lo, hi) = ([0.0, 0.0, -2.0, -2.0], [14.0, 8.0, 2.0, 2.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let x0 = random_in(&mut rng, &lo, &hi);
        let x1 = random_in(&mut rng, &lo, &hi);
        let sr = connect(&sys, &x0, &x1).unwrap();
        for i in 0..400 {
            let t = TAU_MIN + (TAU_CAP - TAU_MIN) * i as f64 / 399.0;
            let c = di_cost_oracle(x0.as_slice(), x1.as_slice(), t);
            assert!(sr.cost <= c * (1.0 + 1e-9), "tau {t}: {} > {c}", sr.cost);
        }
    }
}

#[test]
fn steering_result_is_self_consistent() {
    let sys = quadrotor();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let lo = [0.0, 0.0, 0.0, -2.5, -2.5, -2.5, -1.5, -1.5, -4.0, -4.0];
    let hi = [18.0, 10.0, 8.0, 2.5, 2.5, 2.5, 1.5, 1.5, 4.0, 4.0];
    for _ in 0..10 {
        let x0 = random_in(&mut rng, &lo, &hi);
        let x1 = random_in(&mut rng, &lo, &hi);
        let sr = connect(&sys, &x0, &x1).unwrap();
        let xbar = drift(&sys, &x0, sr.tau_star).unwrap();
        let recon = sr.tau_star + (&x1 - xbar).dot(&sr.d_vec);
        assert_relative_eq!(recon, sr.cost, max_relative = 1e-8);
        assert!(sr.cost >= sr.tau_star);
    }
}

#[test]
fn steer_cost_is_stationary_at_interior_optimum() {
    let sys = double_integrator(2);
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (lo, hi) = ([0.0, 0.0, -2.0, -2.0], [14.0, 8.0, 2.0, 2.0]);
    let mut checked = 0;
    for _ in 0..50 {
        let x0 = random_in(&mut rng, &lo, &hi);
        let x1 = random_in(&mut rng, &lo, &hi);
        let tau_max = arrival_time_bound(&sys, &x0, &x1).unwrap();
        let sr = steer(&sys, &x0, &x1, tau_max).unwrap();
        if sr.tau_star <= 1.01 * TAU_MIN || sr.tau_star >= 0.99 * tau_max {
            continue;
        }
        let h = 1e-5 * sr.tau_star;
        let up = steer_cost(&sys, &x0, &x1, sr.tau_star + h).unwrap();
        let down = steer_cost(&sys, &x0, &x1, sr.tau_star - h).unwrap();
        let deriv = (up - down) / (2.0 * h);
        assert!(deriv.abs() <= 1e-4, "derivative {deriv} at {}", sr.tau_star);
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn steering_triangle_inequality() {
    let sys = double_integrator(2);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (lo, hi) = ([0.0, 0.0, -2.0, -2.0], [14.0, 8.0, 2.0, 2.0]);
    for _ in 0..60 {
        let a = random_in(&mut rng, &lo, &hi);
        let b = random_in(&mut rng, &lo, &hi);
        let c = random_in(&mut rng, &lo, &hi);
        let ac = connect(&sys, &a, &c).unwrap().cost;
        let ab = connect(&sys, &a, &b).unwrap().cost;
        let bc = connect(&sys, &b, &c).unwrap().cost;
        assert!(ac <= ab + bc + 1e-6, "{ac} > {ab} + {bc}");
        assert!(ac >= TAU_MIN);
    }
}

#[test]
fn gramian_is_symmetric_along_time() {
    for sys in [double_integrator(2), quadrotor()] {
        for t in [1e-3, 0.1, 1.0, 4.0, 50.0] {
            let g = gramian(&sys, t).unwrap();
            assert!((&g - g.transpose()).amax() <= 1e-10 * g.amax());
        }
    }
}

#[test]
fn synthesize_equilibrium_stays_put() {
    let sys = double_integrator(2);
    let x = dvec(&[2.0, 3.0, 0.0, 0.0]);
    let sr = steer(&sys, &x, &x, 2.0).unwrap();
    let traj = synthesize(&sys, &sr, 4).unwrap();
    assert_eq!(traj.states.len(), 5);
    for s in &traj.states {
        assert!((s - &x).amax() <= 1e-12);
    }
}

#[test]
fn synthesize_single_segment_returns_endpoints() {
    let sys = quadrotor();
    let x0 = dvec(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let x1 = dvec(&[4.0, 2.0, 3.0, 0.5, 0.0, -0.5, 0.1, 0.0, 0.0, 1.0]);
    let sr = connect(&sys, &x0, &x1).unwrap();
    let traj = synthesize(&sys, &sr, 1).unwrap();
    assert_eq!(traj.states.len(), 2);
    assert_eq!(traj.states[0], x0);
    assert!((&traj.states[1] - &x1).norm() <= 1e-6 * (1.0 + x1.norm()));
    assert!(matches!(synthesize(&sys, &sr, 0), Err(Error::Precondition(_))));
}

#[test]
fn synthesize_double_integrator_matches_integration() {
    let sys = double_integrator(1);
    let (x0, x1) = (dvec(&[0.0, 0.0]), dvec(&[1.0, 0.0]));
    let sr = steer(&sys, &x0, &x1, 10.0).unwrap();
    let samples = synthesize(&sys, &sr, 200).unwrap();
    assert!((&samples.states[200] - &x1).norm() <= 1e-6 * (1.0 + x1.norm()));
    // rise and settle: position never decreases, velocity returns to zero
    for w in samples.states.windows(2) {
        assert!(w[1][0] >= w[0][0] - 1e-12);
    }

    // integrate the open-loop control with fine RK4 and compare at samples
    let mut traj = Trajectory::new(&sys, &sr).unwrap();
    let mut x = x0.clone();
    let sub = 20;
    let mut running = 0.0;
    for k in 0..200 {
        let t0 = samples.times[k];
        let h = (samples.times[k + 1] - t0) / sub as f64;
        for j in 0..sub {
            let t = t0 + j as f64 * h;
            let f = |tt: f64, xx: &DVector<f64>, tr: &mut Trajectory| {
                sys.a() * xx + sys.b() * tr.control(tt).unwrap() + sys.drift_vector()
            };
            let k1 = f(t, &x, &mut traj);
            let k2 = f(t + h / 2.0, &(&x + &k1 * (h / 2.0)), &mut traj);
            let k3 = f(t + h / 2.0, &(&x + &k2 * (h / 2.0)), &mut traj);
            let k4 = f(t + h, &(&x + &k3 * h), &mut traj);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            // Simpson on the running cost
            let l = |tt: f64, tr: &mut Trajectory| {
                let u = tr.control(tt).unwrap();
                1.0 + (u.transpose() * sys.r() * &u)[(0, 0)]
            };
            running += h / 6.0 * (l(t, &mut traj) + 4.0 * l(t + h / 2.0, &mut traj) + l(t + h, &mut traj));
        }
        assert!((&x - &samples.states[k + 1]).amax() <= 1e-8);
    }
    assert_relative_eq!(running, sr.cost, max_relative = 1e-4);
}

#[test]
fn quadrotor_running_cost_matches_steering_cost() {
    let sys = quadrotor();
    let x0 = dvec(&[2.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let x1 = dvec(&[5.0, 3.0, 2.0, 0.5, -0.3, 0.0, 0.0, 0.2, 0.0, 0.0]);
    let sr = connect(&sys, &x0, &x1).unwrap();
    let mut traj = Trajectory::new(&sys, &sr).unwrap();
    let n = 4000;
    let h = sr.tau_star / n as f64;
    let mut running = 0.0;
    for i in 0..=n {
        let t = i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let u = traj.control(t).unwrap();
        running += w * (1.0 + (u.transpose() * sys.r() * &u)[(0, 0)]);
    }
    running *= h / 3.0;
    assert_relative_eq!(running, sr.cost, max_relative = 1e-4);
}

#[test]
fn system_validation() {
    let a = DMatrix::zeros(2, 2);
    let b = DMatrix::identity(2, 1);
    let c = DVector::zeros(2);
    assert!(LinearSystem::new(a.clone(), b.clone(), c.clone(), DMatrix::identity(1, 1) * -1.0).is_err());
    assert!(matches!(
        LinearSystem::new(a.clone(), b.clone(), DVector::zeros(3), DMatrix::identity(1, 1)),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(LinearSystem::new(a, b, c, DMatrix::identity(1, 1)).is_ok());
}
