use std::f64::consts::PI;

use nld_core::radial::{NormSpec, Parity, RadialField, RadialGrid, Spacing};
use nld_core::Error;
use proptest::prelude::*;

fn uniform(r_max: f64, n: usize) -> RadialGrid {
    RadialGrid::new(r_max, n, Spacing::Uniform).unwrap()
}

#[test]
fn uniform_grid_arithmetic() {
    let g = uniform(20.0, 2000);
    assert_eq!(g.len(), 2000);
    assert!((g.nodes()[0] - 0.01).abs() < 1e-15);
    assert!((g.nodes()[1] - g.nodes()[0] - 0.01).abs() < 1e-14);
    assert_eq!(g.r_max(), 20.0);
}

#[test]
fn too_few_nodes_or_bad_extent_is_rejected() {
    assert!(matches!(RadialGrid::new(20.0, 5, Spacing::Uniform), Err(Error::InvalidGrid(_))));
    assert!(matches!(RadialGrid::new(0.0, 100, Spacing::Uniform), Err(Error::InvalidGrid(_))));
    assert!(matches!(RadialGrid::new(-1.0, 100, Spacing::Graded), Err(Error::InvalidGrid(_))));
    assert!(RadialGrid::from_nodes(vec![0.1; 20], Spacing::Uniform).is_err());
}

#[test]
fn graded_grid_is_finer_near_origin() {
    let g = RadialGrid::new(40.0, 4000, Spacing::Graded).unwrap();
    let r = g.nodes();
    assert!(r[1] - r[0] < r[r.len() - 1] - r[r.len() - 2]);
    assert_eq!(*r.last().unwrap(), 40.0);
}

#[test]
fn closed_form_integrals() {
    let g = uniform(40.0, 4000);
    let exp = RadialField::from_fn(&g, |r| (-r).exp());
    assert!((exp.integrate() - 8.0 * PI).abs() < 1e-6);
    let gauss = RadialField::from_fn(&g, |r| (-r * r).exp());
    assert!((gauss.integrate() - PI.powf(1.5)).abs() < 1e-6);
    assert_eq!(RadialField::zeros(&g).integrate(), 0.0);
}

#[test]
fn norms_of_the_exponential() {
    let g = uniform(40.0, 4000);
    let f = RadialField::from_fn(&g, |r| (-r).exp());
    assert!((f.norm(NormSpec::lp(2.0).unwrap()) - PI.sqrt()).abs() < 1e-5);
    assert_eq!(f.norm(NormSpec::sup()), (-g.nodes()[0]).exp());
    // W^{1,p}: |f'| = f, so the norm is 2^{1/p} times the Lᵖ norm
    let w = f.norm(NormSpec::w1p(4.0).unwrap());
    let l = f.norm(NormSpec::l4());
    assert!((w / l - 2f64.powf(0.25)).abs() < 1e-3);
    let zero = RadialField::zeros(&g);
    for spec in [NormSpec::l4(), NormSpec::w14(), NormSpec::sup()] {
        assert_eq!(zero.norm(spec), 0.0);
    }
}

#[test]
fn norm_order_below_two_is_rejected() {
    assert!(NormSpec::lp(1.5).is_err());
}

#[test]
fn derivative_examples() {
    let g = uniform(10.0, 1000);
    let lin = RadialField::from_fn(&g, |r| r).derivative();
    assert!(lin.values().iter().all(|d| (d - 1.0).abs() < 1e-10));
    let c = RadialField::from_fn(&g, |_| 3.5).derivative();
    assert!(c.values().iter().all(|d| d.abs() < 1e-12));
    let err = |n: usize| {
        let g = uniform(10.0, n);
        let d = RadialField::from_fn(&g, |r| (-r).exp()).derivative();
        d.values()
            .iter()
            .zip(g.nodes())
            .map(|(d, r)| (d + (-r).exp()).abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(500), err(1000));
    let order = (coarse / fine).log2();
    assert!(order > 1.8, "observed order {order}");
}

#[test]
fn differentiating_an_antiderivative_recovers_the_integrand() {
    // F(r) = -(r² + 2r + 2)e^{-r} has F' = r² e^{-r}
    let g = uniform(20.0, 4000);
    let big_f = RadialField::from_fn(&g, |r| -(r * r + 2.0 * r + 2.0) * (-r).exp());
    let d = big_f.derivative();
    let worst = d
        .values()
        .iter()
        .zip(g.nodes())
        .map(|(d, r)| (d - r * r * (-r).exp()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 5e-4, "{worst}");
}

#[test]
fn non_finite_values_are_rejected() {
    let g = uniform(1.0, 20);
    let mut v = vec![0.0; 20];
    v[3] = f64::NAN;
    assert!(matches!(RadialField::new(g.clone(), v), Err(Error::NonFinite { index: 3, .. })));
    assert!(RadialField::new(g, vec![0.0; 19]).is_err());
}

#[test]
fn serialization_round_trips_exactly() {
    let g = RadialGrid::new(7.0, 64, Spacing::Graded).unwrap();
    let f = RadialField::from_fn(&g, |r| (1.0 / 3.0) * (-r).exp() * r.sin());
    assert_eq!(RadialField::from_csv(&f.to_csv(), Spacing::Graded).unwrap(), f);
    assert_eq!(RadialField::from_json(&f.to_json()).unwrap(), f);
}

#[test]
fn interpolation_is_exact_at_nodes_and_rejects_out_of_range() {
    let g = uniform(5.0, 50);
    let f = RadialField::from_fn(&g, |r| (-r * r).exp());
    for (r, v) in g.nodes().iter().zip(f.values()) {
        assert_eq!(f.interpolate(*r, Parity::Even).unwrap(), *v);
    }
    assert!(matches!(f.interpolate(5.5, Parity::Even), Err(Error::OutOfRange { .. })));
    assert_eq!(f.interpolate(0.0, Parity::Odd).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn lp_norm_is_monotone(
        seeds in proptest::collection::vec((-1.0f64..1.0, 0.5f64..3.0), 3),
        shrink in 0.0f64..1.0,
        p in prop_oneof![Just(2.0), Just(4.0), Just(f64::INFINITY)],
    ) {
        let g = uniform(15.0, 300);
        let b = RadialField::from_fn(&g, |r| seeds.iter().map(|(c, l)| c * (-l * r).exp()).sum());
        let a = b.map_with_r(|r, v| v * shrink * (r.sin() * 0.5 + 0.5));
        let spec = NormSpec::lp(p).unwrap();
        prop_assert!(a.norm(spec) <= b.norm(spec) * (1.0 + 1e-12));
    }

    #[test]
    fn quadrature_is_exact_for_quadratics(c in proptest::array::uniform3(-5.0f64..5.0), n in 16usize..200) {
        let g = RadialGrid::new(3.0, n, Spacing::Graded).unwrap();
        let f = RadialField::from_fn(&g, |r| c[0] + c[1] * r + c[2] * r * r);
        let r1 = g.nodes()[0];
        let prim = |r: f64| c[0] * r.powi(3) / 3.0 + c[1] * r.powi(4) / 4.0 + c[2] * r.powi(5) / 5.0;
        let exact = 4.0 * PI * (prim(3.0) - prim(r1));
        let total = f.integrate();
        // the origin cell integrates an even quadratic through the first two nodes
        let (v1, v2, r2) = (f.values()[0], f.values()[1], g.nodes()[1]);
        let a = (v2 - v1) / (r2 * r2 - r1 * r1);
        let c0 = v1 - a * r1 * r1;
        let origin = 4.0 * PI * (c0 * r1.powi(3) / 3.0 + a * r1.powi(5) / 5.0);
        prop_assert!((total - origin - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
    }
}
