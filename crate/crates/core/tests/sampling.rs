use btit::dynamics::{connect, Preset};
use btit::geometry::{Aabb, ObstacleSet, Workspace};
use btit::sampling::{batch_rng, controller_estimates, informed_sample, sample_prolate, sample_uniform};
use btit::{Error, Scenario};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

/// Single integrator in `[0, 10]^2`; its steering cost is twice the distance.
fn plane() -> Scenario {
    let ws = Workspace::new(vec![0.0, 0.0], vec![10.0, 10.0], vec![0, 1]).unwrap();
    Scenario::new(
        "plane",
        Preset::Si2d,
        ws,
        ObstacleSet::default(),
        DVector::from_vec(vec![2.0, 5.0]),
        DVector::from_vec(vec![8.0, 5.0]),
        None,
    )
    .unwrap()
}

fn foci_sum(scn: &Scenario, x: &DVector<f64>) -> f64 {
    (x - &scn.start).norm() + (x - &scn.goal).norm()
}

#[test]
fn single_integrator_cost_is_twice_the_distance() {
    let scn = plane();
    let mut rng = batch_rng(3, 0);
    for _ in 0..50 {
        let a = sample_uniform(&scn, &mut rng).unwrap();
        let b = sample_uniform(&scn, &mut rng).unwrap();
        let c = connect(&scn.system, &a, &b).unwrap().cost;
        assert!((c - 2.0 * (&a - &b).norm()).abs() < 1e-6 * c.max(1.0));
    }
}

#[test]
fn uniform_samples_cover_the_box() {
    let scn = plane();
    let mut rng = batch_rng(1, 0);
    let n = 20_000;
    let mut mean = DVector::zeros(2);
    for _ in 0..n {
        let x = sample_uniform(&scn, &mut rng).unwrap();
        assert!(scn.workspace.contains(x.as_slice()));
        mean += x;
    }
    mean /= n as f64;
    // Standard error is 10 / sqrt(12 n) ≈ 0.02 per coordinate.
    assert!((mean[0] - 5.0).abs() < 0.1 && (mean[1] - 5.0).abs() < 0.1, "{mean}");
}

#[test]
fn uniform_samples_avoid_obstacles() {
    let mut scn = plane();
    scn.obstacles.boxes.push(Aabb::new(vec![4.0, 0.0], vec![6.0, 10.0]).unwrap());
    let mut rng = batch_rng(2, 0);
    for _ in 0..2000 {
        let x = sample_uniform(&scn, &mut rng).unwrap();
        assert!(!(4.0..=6.0).contains(&x[0]));
    }
}

#[test]
fn fully_covered_space_is_reported() {
    let mut scn = plane();
    scn.obstacles.boxes.push(Aabb::new(vec![-1.0, -1.0], vec![11.0, 11.0]).unwrap());
    let mut rng = batch_rng(0, 0);
    assert!(matches!(sample_uniform(&scn, &mut rng), Err(Error::InfeasibleSpace(_))));
}

#[test]
fn batches_are_deterministic_per_seed_and_index() {
    let scn = plane();
    let draw = |seed, batch| informed_sample(&scn, 20, 20.0, &mut batch_rng(seed, batch), batch).unwrap().states;
    assert_eq!(draw(5, 0), draw(5, 0));
    assert_eq!(draw(5, 3), draw(5, 3));
    assert_ne!(draw(5, 0), draw(5, 1));
    assert_ne!(draw(5, 0), draw(6, 0));
}

#[test]
fn infinite_incumbent_accepts_every_valid_state() {
    let scn = plane();
    let batch = informed_sample(&scn, 100, f64::INFINITY, &mut batch_rng(0, 0), 0).unwrap();
    assert_eq!(batch.states.len(), 100);
    assert_eq!(batch.attempts, 100);
    assert!(!batch.saturated && !batch.interrupted);
}

#[test]
fn zero_batch_size_is_rejected() {
    let scn = plane();
    assert!(matches!(
        informed_sample(&scn, 0, 10.0, &mut batch_rng(0, 0), 0),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn acceptance_rate_matches_the_ellipse_area() {
    // Cost 2 (|x - s| + |x - g|) < C is an ellipse with semi-major axis C / 4
    // and focal half-distance 3.
    let scn = plane();
    let c_best = 16.0;
    let (a, c) = (c_best / 4.0, 3.0);
    let area = std::f64::consts::PI * a * (a * a - c * c).sqrt();
    let expected = area / 100.0;
    let batch = informed_sample(&scn, 10_000, c_best, &mut batch_rng(9, 0), 0).unwrap();
    let rate = batch.states.len() as f64 / batch.attempts as f64;
    assert!((rate / expected - 1.0).abs() < 0.05, "acceptance {rate} vs area ratio {expected}");
    for (x, est) in batch.states.iter().zip(&batch.estimates) {
        assert!(est[0].cost + est[1].cost < c_best);
        assert!(foci_sum(&scn, x) < c_best / 2.0 + 1e-6);
    }
}

#[test]
fn smaller_incumbents_focus_the_batch() {
    let scn = plane();
    let mut last = 1.0;
    for c_best in [40.0, 24.0, 16.0, 13.0] {
        let batch = informed_sample(&scn, 500, c_best, &mut batch_rng(4, 0), 0).unwrap();
        let rate = batch.states.len() as f64 / batch.attempts as f64;
        assert!(rate <= last, "rate {rate} at C = {c_best} above {last}");
        last = rate;
    }
}

#[test]
fn unreachable_informed_set_saturates() {
    let scn = plane();
    // The straight line costs 12, so nothing beats 11.
    let batch = informed_sample(&scn, 2, 11.0, &mut batch_rng(0, 0), 0).unwrap();
    assert!(batch.saturated);
    assert!(batch.states.is_empty());
    assert_eq!(batch.attempts, 2000);
}

#[test]
fn prolate_samples_stay_inside_the_ellipse() {
    let scn = plane();
    let rate = Preset::Si2d.euclidean_rate();
    let mut rng = batch_rng(8, 0);
    let mut mean = DVector::zeros(2);
    let n = 4000;
    for _ in 0..n {
        let x = sample_prolate(&scn, rate, 16.0, &mut rng).unwrap();
        assert!(rate * foci_sum(&scn, &x) < 16.0 + 1e-9);
        mean += x;
    }
    mean /= n as f64;
    assert!((mean[0] - 5.0).abs() < 0.15 && (mean[1] - 5.0).abs() < 0.15, "{mean}");
    assert!(matches!(sample_prolate(&scn, rate, 11.0, &mut rng), Err(Error::InfeasibleSpace(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn accepted_states_are_valid_and_informed(seed in any::<u64>(), c_best in 12.5f64..60.0, m in 1usize..40) {
        let scn = plane();
        let batch = informed_sample(&scn, m, c_best, &mut batch_rng(seed, 0), 0).unwrap();
        prop_assert_eq!(batch.states.len(), batch.estimates.len());
        prop_assert!(batch.states.len() == m || batch.saturated);
        for (x, est) in batch.states.iter().zip(&batch.estimates) {
            prop_assert!(scn.is_free(x.as_slice()));
            prop_assert!(est[0].cost + est[1].cost < c_best);
            prop_assert_eq!(*est, controller_estimates(&scn, x));
        }
    }

    #[test]
    fn batch_streams_are_independent_of_draw_count(seed in any::<u64>(), skip in 0usize..50) {
        let mut a = batch_rng(seed, 1);
        let mut burned = batch_rng(seed, 0);
        for _ in 0..skip {
            let _: f64 = burned.gen();
        }
        let b = batch_rng(seed, 1);
        prop_assert_eq!(a.gen::<u64>(), { let mut b = b; b.gen::<u64>() });
    }
}
