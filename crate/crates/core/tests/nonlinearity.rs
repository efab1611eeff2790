use nld_core::ground_state::{solve_ground_state, GroundState};
use nld_core::linear_operator::FieldPair;
use nld_core::nonlinearity::{
    counterexample_ratio, difference_ratio, eval_k, mixed_difference_ratio, remainder_ratio, sweep, sweeps_to_csv,
    Inequality, NonlinearContext,
};
use nld_core::radial::{NormSpec, RadialGrid, Spacing};
use nld_core::Error;
use proptest::prelude::*;

fn ground_state(theta: f64) -> GroundState {
    solve_ground_state(theta, &RadialGrid::new(20.0, 2000, Spacing::Uniform).unwrap(), 1e-12).unwrap()
}

#[test]
fn limit_system_has_the_trivial_fixed_point() {
    for theta in [1.0, 1.5] {
        let gs = ground_state(theta);
        let ctx = NonlinearContext::new(&gs, 0.0).unwrap();
        let k = eval_k(&ctx, &FieldPair::zeros(gs.grid())).unwrap();
        assert_eq!(k.sup_norm(), 0.0);
    }
}

#[test]
fn unperturbed_profile_at_positive_epsilon() {
    let gs = ground_state(1.5);
    let eps = 0.01;
    let ctx = NonlinearContext::new(&gs, eps).unwrap();
    let k = eval_k(&ctx, &FieldPair::zeros(gs.grid())).unwrap();
    assert!(k.second().sup_norm() > 0.0);
    for i in [10, 300, 900] {
        let (q, dq) = (gs.q().values()[i], gs.q_prime().values()[i]);
        let s = (q * q - eps * dq * dq).abs().powf(1.5);
        let k2 = eps * (1.0 + s) * -dq;
        let k1 = (s - q.powi(3)) * q;
        assert!((k.second().values()[i] - k2).abs() <= 1e-14 * k2.abs());
        assert!((k.first().values()[i] - k1).abs() <= 1e-10 * k1.abs(), "{i}");
    }
}

#[test]
fn small_first_component_obeys_the_remainder_bound() {
    for theta in [1.0, 1.5, 1.9] {
        let gs = ground_state(theta);
        let ctx = NonlinearContext::new(&gs, 0.0).unwrap();
        let e = FieldPair::from_fns(gs.grid(), |r| 1e-3 * (-r * r / 8.0).exp(), |_| 0.0);
        let k = eval_k(&ctx, &e).unwrap();
        let c = sweep(Inequality::Remainder, theta, 10.0, 201).unwrap().max_ratio;
        let (q, e1, k1) = (gs.q().values(), e.first().values(), k.first().values());
        for i in 0..q.len() {
            let bound = (q[i].powf(2.0 * theta - 1.0) + e1[i].abs().powf(2.0 * theta - 1.0)) * e1[i] * e1[i];
            assert!(k1[i].abs() <= c * bound * 1.01 + 1e-300, "theta {theta} node {i}");
        }
        assert!(k.second().sup_norm() == 0.0);
    }
}

#[test]
fn nonlinearity_has_no_linear_part() {
    // ‖K‖_{L⁴} / (ε + ‖e‖² + ‖e‖^{2θ+1}) must not grow as both shrink
    for theta in [1.0, 1.5] {
        let gs = ground_state(theta);
        let shape = FieldPair::from_fns(gs.grid(), |r| (-r * r / 4.0).exp(), |r| r * (-r * r / 4.0).exp());
        let shape = shape.scale(1.0 / shape.w14_norm());
        let ratio = |eps: f64, t: f64| {
            let ctx = NonlinearContext::new(&gs, eps).unwrap();
            let e = shape.scale(t);
            let n = e.w14_norm();
            eval_k(&ctx, &e).unwrap().norm(NormSpec::l4()) / (eps + n * n + n.powf(2.0 * theta + 1.0))
        };
        let large = [(1e-2, 0.0), (0.0, 1e-1), (1e-2, 1e-1)].map(|(e, t)| ratio(e, t)).into_iter().fold(0.0, f64::max);
        for (eps, t) in [(1e-5, 0.0), (0.0, 1e-4), (1e-5, 1e-4), (1e-4, 1e-3), (1e-6, 1e-2)] {
            let small = ratio(eps, t);
            assert!(small.is_finite() && small <= 2.0 * large, "theta {theta}: {small} vs {large}");
        }
    }
}

#[test]
fn epsilon_must_keep_omega_positive() {
    let gs = ground_state(1.0);
    assert!(NonlinearContext::new(&gs, 0.5).is_err());
    assert!(NonlinearContext::new(&gs, -1e-3).is_err());
    let ctx = NonlinearContext::new(&gs, 0.1).unwrap();
    assert!((ctx.omega() - 0.4).abs() < 1e-15);
}

#[test]
fn remainder_examples() {
    assert_eq!(remainder_ratio(2.0, 0.0, 1.0), 0.0);
    assert!((remainder_ratio(2.0, 1.0, 1.0) - 7.0 / 3.0).abs() < 1e-15);
    assert_eq!(remainder_ratio(0.0, 0.0, 1.5), 0.0);
}

#[test]
fn low_theta_remainder_drops_the_first_weight() {
    for theta in [0.3, 0.5] {
        let rec = sweep(Inequality::Remainder, theta, 10.0, 101).unwrap();
        assert!(rec.max_ratio.is_finite(), "{theta}");
    }
}

#[test]
fn difference_examples() {
    assert_eq!(difference_ratio(3.0, 0.0, 1.5), 0.0);
    let rec = sweep(Inequality::Difference, 1.5, 10.0, 201).unwrap();
    assert!(rec.max_ratio.is_finite());
}

#[test]
fn mixed_difference_examples() {
    assert_eq!(mixed_difference_ratio(1.0, 0.0, 2.0, 1.5).unwrap(), 0.0);
    assert!(matches!(mixed_difference_ratio(1.0, 1.0, 1.0, 0.9), Err(Error::InvalidParameter(_))));
    assert!(mixed_difference_ratio(1.0, 1.0, 1.0, 2.0).is_err());
    assert!(sweep(Inequality::MixedDifference, 2.0, 5.0, 11).is_err());
    // exact zero on the boundary of the sign-preserving region
    assert_eq!(mixed_difference_ratio(5.0, 1.0, -1.0, 1.0).unwrap(), 0.0);
    assert_eq!(mixed_difference_ratio(-0.5, 0.1, 0.1, 1.0).unwrap(), 0.0);
    assert_eq!(mixed_difference_ratio(1e300, 2e299, -2e299, 1.0).unwrap(), 0.0);
    let rec = sweep(Inequality::MixedDifference, 1.5, 5.0, 35).unwrap();
    assert!(rec.max_ratio.is_finite() && rec.points == 35 * 35 * 35);
}

#[test]
fn sweep_rejects_bad_shapes_and_is_deterministic() {
    assert!(sweep(Inequality::Difference, 1.5, 10.0, 4).is_err());
    assert!(sweep(Inequality::Difference, 1.5, 10.0, 100).is_err());
    assert!(sweep(Inequality::Difference, 1.5, 0.0, 101).is_err());
    let a = sweep(Inequality::Remainder, 1.25, 10.0, 101).unwrap();
    let b = sweep(Inequality::Remainder, 1.25, 10.0, 101).unwrap();
    assert_eq!(a, b);
    let csv = sweeps_to_csv(&[a]);
    assert!(csv.starts_with("inequality,theta,extent,points,max_ratio,argmax\nremainder,"));
}

#[test]
fn counterexample_scaling_and_guards() {
    let gs = ground_state(0.5);
    let eps = [1e-2, 1e-3, 1e-4];
    let r: Vec<f64> = eps.iter().map(|&e| counterexample_ratio(e, 2.0, 0.5, &gs, 5.0).unwrap()).collect();
    assert!(r[0] < r[1] && r[1] < r[2], "{r:?}");
    for w in r.windows(2) {
        let slope = (w[1] / w[0]).log10();
        assert!((slope - 0.5).abs() < 0.1, "{slope}");
    }
    let tame: Vec<f64> = eps.iter().map(|&e| counterexample_ratio(e, 0.5, 0.5, &gs, 5.0).unwrap()).collect();
    assert!(tame[2] <= tame[0]);
    assert_eq!(counterexample_ratio(1e-2, 400.0, 0.5, &gs, 5.0).unwrap(), 0.0);
    let cubic = ground_state(1.0);
    assert!(counterexample_ratio(1e-2, 2.0, 1.0, &cubic, 5.0).is_err());
    assert!(matches!(
        counterexample_ratio(1e-2, 2.0, 0.75, &gs, 5.0),
        Err(Error::ParameterMismatch(_))
    ));
}

proptest! {
    #[test]
    fn unit_theta_difference_is_a_triangle_inequality(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        prop_assert!(difference_ratio(a, b, 1.0) <= 1.0 + 1e-12);
    }

    #[test]
    fn unit_theta_mixed_difference_vanishes_far_from_the_kink(
        a in prop_oneof![1e-3f64..1e3, -1e3f64..-1e-3],
        s in -0.2f64..0.2,
        t in -0.2f64..0.2,
    ) {
        prop_assert_eq!(mixed_difference_ratio(a, s * a, t * a, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn ratios_are_finite(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0, theta in 1.0f64..1.99) {
        prop_assert!(remainder_ratio(a, b, theta).is_finite());
        prop_assert!(difference_ratio(a, b, theta).is_finite());
        prop_assert!(mixed_difference_ratio(a, b, c, theta).unwrap().is_finite());
    }
}
