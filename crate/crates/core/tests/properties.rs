use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use widthest::caps_proj::{capped_sum, project_capped_simplex, project_spectahedron};
use widthest::estimators::{robust_mean, run_gsm, EstimationConfig, RobustMeanMethod};
use widthest::geometry::{ConvexBody, InnerNorm};
use widthest::linalg::{symmetric_eigen, SymmetricMatrix};

fn bodies(n: usize) -> Vec<ConvexBody> {
    let axes: Vec<f64> = (1..=n).map(|i| 3.0 / i as f64).collect();
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0
        } else {
            0.3 / (1 + i + j) as f64
        }
    });
    vec![
        ConvexBody::ellipsoid(axes.clone()).unwrap(),
        ConvexBody::hyperrectangle(axes.clone()).unwrap(),
        ConvexBody::p_ball(n, 4.0, 1.5).unwrap(),
        ConvexBody::norm_image(a, InnerNorm::Lp { p: 3.0 }).unwrap(),
        ConvexBody::ellipsoid(axes)
            .unwrap()
            .intersect_ball(1.0)
            .unwrap(),
    ]
}

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

#[test]
fn gauge_examples() {
    let ball = ConvexBody::euclidean_ball(2, 1.0).unwrap();
    assert_relative_eq!(
        ball.gauge(&DVector::from_vec(vec![3.0, 4.0])).unwrap(),
        5.0,
        epsilon = 1e-12
    );
    let ell = ConvexBody::ellipsoid(vec![2.0, 1.0]).unwrap();
    assert_relative_eq!(
        ell.gauge(&DVector::from_vec(vec![2.0, 0.0])).unwrap(),
        1.0,
        epsilon = 1e-12
    );
    let bx = ConvexBody::hyperrectangle(vec![1.0, 1.0]).unwrap();
    assert_relative_eq!(
        bx.gauge(&DVector::from_vec(vec![0.5, -0.25])).unwrap(),
        0.5,
        epsilon = 1e-12
    );
    assert!(ball.gauge(&DVector::from_vec(vec![1.0])).is_err());
}

#[test]
fn intersect_ball_examples() {
    // c below the inner radius: intersect_ball refuses, localize returns the smaller ball.
    assert!(ConvexBody::euclidean_ball(2, 2.0)
        .unwrap()
        .intersect_ball(1.0)
        .is_err());
    let big = ConvexBody::euclidean_ball(2, 2.0)
        .unwrap()
        .localize(1.0)
        .unwrap();
    let x = DVector::from_vec(vec![0.3, -0.4]);
    assert_relative_eq!(big.gauge(&x).unwrap(), 0.5, epsilon = 1e-12);
    let ell = ConvexBody::ellipsoid(vec![4.0, 1.0])
        .unwrap()
        .intersect_ball(2.0)
        .unwrap();
    assert_relative_eq!(
        ell.gauge(&DVector::from_vec(vec![3.0, 0.0])).unwrap(),
        1.5,
        epsilon = 1e-12
    );
    assert!(ConvexBody::ellipsoid(vec![4.0, 1.0])
        .unwrap()
        .intersect_ball(0.5)
        .is_err());
    let same = ConvexBody::ellipsoid(vec![4.0, 1.0]).unwrap();
    let capped = same.intersect_ball(4.0).unwrap();
    let mut r = widthest::rng::stream(3, &[]);
    for _ in 0..1000 {
        let x = widthest::rng::gaussian_vector(&mut r, 2) * 3.0;
        assert!((capped.gauge(&x).unwrap() - same.gauge(&x).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn projection_examples() {
    let ball = ConvexBody::euclidean_ball(2, 1.0).unwrap();
    let inside = DVector::from_vec(vec![0.2, 0.1]);
    let wp = ball.weak_project(&inside, 1e-6).unwrap();
    assert_eq!(wp.point, inside);
    assert_eq!(wp.certificate, 0.0);
    let wp = ball
        .weak_project(&DVector::from_vec(vec![3.0, 0.0]), 1e-6)
        .unwrap();
    assert_relative_eq!(wp.point[0], 1.0, epsilon = 1e-6);
    assert_relative_eq!(wp.certificate, 2.0, epsilon = 1e-6);
}

#[test]
fn capped_simplex_examples() {
    let r = project_capped_simplex(&[0.5, 0.5, 0.5], 3).unwrap();
    assert_eq!(r.w, vec![1.0, 1.0, 1.0]);
    let r = project_capped_simplex(&[2.0, 0.0], 1).unwrap();
    assert_relative_eq!(r.w[0], 1.0, epsilon = 1e-12);
    assert_relative_eq!(r.w[1], 0.0, epsilon = 1e-12);
    assert!(project_capped_simplex(&[1.0], 2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauge_is_a_norm(x in vec_strategy(4), y in vec_strategy(4), t in -4.0..4.0f64) {
        let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
        for body in bodies(4) {
            let gx = body.gauge(&x).unwrap();
            let gy = body.gauge(&y).unwrap();
            prop_assert!((body.gauge(&(&x * t)).unwrap() - t.abs() * gx).abs() <= 1e-9 * (1.0 + gx));
            prop_assert!((body.gauge(&-&x).unwrap() - gx).abs() <= 1e-12 * (1.0 + gx));
            prop_assert!(body.gauge(&(&x + &y)).unwrap() <= gx + gy + 1e-9);
        }
    }

    #[test]
    fn radii_sandwich_the_body(u in vec_strategy(4)) {
        let u = DVector::from_vec(u);
        prop_assume!(u.norm() > 1e-3);
        let u = u.normalize();
        for body in bodies(4) {
            let reach = 1.0 / body.gauge(&u).unwrap();
            prop_assert!(body.inner_radius() <= reach + 1e-9 && reach <= body.outer_radius() + 1e-9);
        }
    }

    #[test]
    fn weak_projection_certificates(z in vec_strategy(4), inner in vec_strategy(4)) {
        let z = DVector::from_vec(z) * 2.0;
        for body in bodies(4) {
            let eps = 1e-6;
            let wp = body.weak_project(&z, eps).unwrap();
            prop_assert!(body.gauge(&wp.point).unwrap() <= 1.0 + 1e-9);
            prop_assert!(wp.certificate + 1e-12 >= (&z - &wp.point).norm());
            // Any feasible point is at least the certified lower bound away.
            let x = DVector::from_vec(inner.clone());
            let g = body.gauge(&x).unwrap();
            let x = if g > 1.0 { x / g } else { x };
            let dist = (&z - x).norm();
            prop_assert!(dist + 1e-9 >= wp.lower_bound);
            prop_assert!(dist + 1e-9 >= wp.certificate - eps);
        }
    }

    #[test]
    fn capped_simplex_is_feasible_and_shift_invariant(v in prop::collection::vec(-3.0..3.0f64, 1..10), k_frac in 0.0..=1.0f64, shift in -2.0..2.0f64) {
        let n = v.len();
        let k = ((k_frac * n as f64).round() as usize).min(n);
        let r = project_capped_simplex(&v, k).unwrap();
        prop_assert!(r.w.iter().all(|w| (-1e-12..=1.0 + 1e-12).contains(w)));
        prop_assert!((r.w.iter().sum::<f64>() - k as f64).abs() <= 1e-9);
        if 0 < k && k < n {
            prop_assert!((capped_sum(&v, r.theta) - k as f64).abs() <= 1e-9);
        }
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let s = project_capped_simplex(&shifted, k).unwrap();
        for (a, b) in r.w.iter().zip(&s.w) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn spectahedron_projection_is_feasible_and_idempotent(entries in prop::collection::vec(-2.0..2.0f64, 25), k in 0usize..=5) {
        let b = DMatrix::from_column_slice(5, 5, &entries);
        let y = SymmetricMatrix::new(&b + b.transpose()).unwrap();
        let p = project_spectahedron(&y, k).unwrap();
        let values = symmetric_eigen(p.as_matrix()).unwrap().values;
        prop_assert!(values.iter().all(|v| (-1e-10..=1.0 + 1e-10).contains(v)));
        prop_assert!((p.trace() - k as f64).abs() <= 1e-8);
        let again = project_spectahedron(&p, k).unwrap();
        prop_assert!(again.frobenius_distance(&p) <= 1e-9);
    }

    #[test]
    fn robust_mean_ignores_sample_order(seed in 0u64..1000, k in 1usize..=12, rot in 0usize..24) {
        let mut r = widthest::rng::stream(seed, &[]);
        let samples: Vec<DVector<f64>> = (0..24).map(|_| widthest::rng::gaussian_vector(&mut r, 3)).collect();
        let mut permuted = samples.clone();
        permuted.rotate_left(rot);
        permuted.reverse();
        for method in [RobustMeanMethod::GeometricMedianOfMeans, RobustMeanMethod::CoordinatewiseMedianOfMeans] {
            let a = robust_mean(&samples, k, method, 5).unwrap();
            let b = robust_mean(&permuted, k, method, 5).unwrap();
            prop_assert!((a - b).norm() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sequence_estimate_lies_in_the_body(y in vec_strategy(4), sigma in 0.3..2.0f64) {
        let body = ConvexBody::ellipsoid(vec![3.0, 2.0, 1.0, 0.5]).unwrap();
        let (mu, trace) = run_gsm(&body, &DVector::from_vec(y), sigma, &EstimationConfig::default()).unwrap();
        prop_assert!(body.gauge(&mu).unwrap() <= 1.0 + 1e-9);
        prop_assert!(trace.records.len() <= trace.max_iterations);
        for rec in &trace.records {
            prop_assert_eq!(rec.d_tilde_next, 0.5 * rec.d_tilde);
        }
    }
}
