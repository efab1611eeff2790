use nalgebra::DMatrix;
use nld_core::ground_state::{solve_ground_state, GroundState};
use nld_core::linear_operator::{
    apply_l, hardy_check, invert_l, invert_l_tilde, yukawa_convolve, yukawa_kernel, FieldPair, LinearizedOp,
};
use nld_core::nonlinearity::random_hardy_fields;
use nld_core::radial::{RadialField, RadialGrid, Spacing};
use nld_core::Error;

fn grid(r_max: f64, n: usize) -> RadialGrid {
    RadialGrid::new(r_max, n, Spacing::Uniform).unwrap()
}

fn cubic(n: usize) -> GroundState {
    solve_ground_state(1.0, &grid(20.0, n), 1e-12).unwrap()
}

fn gaussian_pair(g: &RadialGrid) -> FieldPair {
    FieldPair::from_fns(g, |r| (1.0 - 0.5 * r * r) * (-r * r / 2.0).exp(), |r| r * (-r * r).exp())
}

#[test]
fn zero_maps_to_zero_both_ways() {
    let gs = cubic(1000);
    let op = LinearizedOp::new(&gs).unwrap();
    let z = FieldPair::zeros(gs.grid());
    assert_eq!(apply_l(&op, &z).unwrap().sup_norm(), 0.0);
    assert_eq!(invert_l(&op, &z).unwrap().sup_norm(), 0.0);
    assert_eq!(invert_l_tilde(&z).unwrap().sup_norm(), 0.0);
    assert_eq!(yukawa_convolve(&RadialField::zeros(gs.grid())).sup_norm(), 0.0);
}

#[test]
fn apply_on_second_component_only() {
    let gs = cubic(4000);
    let op = LinearizedOp::new(&gs).unwrap();
    let e = FieldPair::from_fns(gs.grid(), |_| 0.0, |r| (-r * r).exp());
    let out = op.apply(&e).unwrap();
    // e₂ is even here, so its odd continuation has a kink at the origin
    for (i, r) in gs.grid().nodes().iter().enumerate().filter(|(_, r)| **r > 0.1) {
        let g = (-r * r).exp();
        let first = -2.0 * r * g + 2.0 * g / r;
        assert!((out.first().values()[i] - first).abs() < 1e-5, "{r}");
        assert!((out.second().values()[i] - g).abs() < 1e-15);
    }
}

#[test]
fn apply_on_the_profile_uses_the_ground_state_equation() {
    let gs = cubic(4000);
    let op = LinearizedOp::new(&gs).unwrap();
    let e = FieldPair::new(gs.q().clone(), gs.q_prime().scale(-1.0)).unwrap();
    let out = op.apply(&e).unwrap();
    let expect = gs.q().map(|q| -2.0 * q.powi(3));
    let err = out.first().sub(&expect).unwrap().sup_norm() / expect.sup_norm();
    assert!(err < 1e-5, "{err}");
}

#[test]
fn yukawa_recovers_analytic_solution() {
    let g = grid(20.0, 4000);
    let phi = RadialField::from_fn(&g, |r| (7.0 - 4.0 * r * r) * (-r * r).exp());
    let e = yukawa_convolve(&phi);
    let exact = RadialField::from_fn(&g, |r| (-r * r).exp());
    let err = e.sub(&exact).unwrap().sup_norm();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn yukawa_fixes_constants_away_from_the_cut() {
    let g = grid(60.0, 6000);
    let e = yukawa_convolve(&RadialField::from_fn(&g, |_| 1.0));
    for (r, v) in g.nodes().iter().zip(e.values()) {
        if *r <= 30.0 {
            assert!((v - 1.0).abs() < 1e-6, "{r}: {v}");
        }
    }
}

#[test]
fn kernel_has_unit_mass() {
    // the origin cell misses O(r₁²) of the 1/r singularity
    let k = yukawa_kernel(&grid(40.0, 20000));
    assert!((k.integrate() - 1.0).abs() < 1e-6, "{}", k.integrate());
}

#[test]
fn free_inverse_of_helmholtz_forcing() {
    let g = grid(20.0, 4000);
    let phi = FieldPair::from_fns(&g, |r| (7.0 - 4.0 * r * r) * (-r * r).exp(), |_| 0.0);
    let e = invert_l_tilde(&phi).unwrap();
    let e1 = RadialField::from_fn(&g, |r| (-r * r).exp());
    let e2 = RadialField::from_fn(&g, |r| 2.0 * r * (-r * r).exp());
    assert!(e.first().sub(&e1).unwrap().sup_norm() < 1e-5);
    assert!(e.second().sub(&e2).unwrap().sup_norm() < 1e-5);
}

#[test]
fn free_round_trip() {
    let g = grid(20.0, 4000);
    let op = LinearizedOp::free(&g).unwrap();
    let e = gaussian_pair(&g);
    let back = invert_l_tilde(&op.apply(&e).unwrap()).unwrap();
    assert!(back.sub(&e).unwrap().sup_norm() < 1e-5 * e.sup_norm());
}

#[test]
fn round_trips_in_both_orders() {
    let gs = cubic(4000);
    let op = LinearizedOp::new(&gs).unwrap();
    let e = gaussian_pair(gs.grid());
    let back = op.invert(&op.apply(&e).unwrap()).unwrap();
    assert!(back.sub(&e).unwrap().sup_norm() <= 1e-5 * e.sup_norm());
    let phi = gaussian_pair(gs.grid());
    let again = op.apply(&op.invert(&phi).unwrap()).unwrap();
    assert!(again.sub(&phi).unwrap().sup_norm() <= 1e-5 * phi.sup_norm());
}

#[test]
fn kernel_and_banded_inverses_agree_on_random_data() {
    let gs = solve_ground_state(1.5, &grid(20.0, 4000), 1e-12).unwrap();
    let op = LinearizedOp::new(&gs).unwrap();
    let phi = FieldPair::from_fns(gs.grid(), |r| (2.0 - r) * (-0.7 * r * r).exp(), |r| r.sin() * (-r * r / 3.0).exp());
    let banded = op.invert(&phi).unwrap();
    let kernel = op.invert_via_kernels(&phi, 1e-12).unwrap();
    assert!(kernel.relative_residual < 1e-10);
    let diff = kernel.solution.sub(&banded).unwrap().sup_norm() / banded.sup_norm();
    assert!(diff < 1e-4, "{diff}");
}

#[test]
fn neumann_series_agrees_when_it_converges_and_fails_cleanly_otherwise() {
    let g = grid(20.0, 2000);
    let weak: Vec<f64> = g.nodes().iter().map(|r| 0.3 * (-r * r).exp()).collect();
    let op = LinearizedOp::with_potential(&g, &weak).unwrap();
    let phi = gaussian_pair(&g);
    let series = op.invert_via_neumann(&phi, 1e-12, 200).unwrap();
    let banded = op.invert(&phi).unwrap();
    assert!(series.sub(&banded).unwrap().sup_norm() < 1e-4 * banded.sup_norm());

    let gs = cubic(2000);
    let full = LinearizedOp::new(&gs).unwrap();
    let err = full.invert_via_neumann(&phi, 1e-12, 200).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. } | Error::NotConverged { .. }), "{err}");
}

fn sigma_min(n: usize) -> f64 {
    let gs = solve_ground_state(1.0, &grid(20.0, n), 1e-12).unwrap();
    let op = LinearizedOp::new(&gs).unwrap();
    let m = 2 * n;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let mut flat = vec![0.0; m];
        flat[k] = 1.0;
        let (v1, v2) = flat.split_at(n);
        let e = FieldPair::new(
            RadialField::new(gs.grid().clone(), v1.to_vec()).unwrap(),
            RadialField::new(gs.grid().clone(), v2.to_vec()).unwrap(),
        )
        .unwrap();
        let col = op.apply(&e).unwrap();
        for i in 0..n {
            a[(i, k)] = col.first().values()[i];
            a[(n + i, k)] = col.second().values()[i];
        }
    }
    a.singular_values().min()
}

#[test]
fn smallest_singular_value_survives_refinement() {
    let s: Vec<f64> = [100, 200, 400].iter().map(|&n| sigma_min(n)).collect();
    assert!(s.iter().all(|v| *v > 1e-2), "{s:?}");
    assert!(s[2] > 0.5 * s[0], "{s:?}");
}

#[test]
fn hardy_examples() {
    let g = grid(40.0, 8000);
    let f = RadialField::from_fn(&g, |r| r * (-r).exp());
    for p in [2.0, 4.0, f64::INFINITY] {
        let (a, b) = hardy_check(&f, p).unwrap();
        assert!(a.is_finite() && b.is_finite() && b > 0.0);
    }
    assert_eq!(hardy_check(&RadialField::zeros(&g), 2.0).unwrap(), (0.0, 0.0));
    assert!(hardy_check(&f, 1.0).is_err());
}

#[test]
fn hardy_ratio_at_p2_stays_below_one() {
    let g = grid(40.0, 8000);
    let worst = random_hardy_fields(&g, 50, 3)
        .iter()
        .map(|f| {
            let (a, b) = hardy_check(f, 2.0).unwrap();
            a / b
        })
        .fold(0.0, f64::max);
    assert!(worst <= 1.0 + 1e-6, "{worst}");
}

#[test]
fn below_one_theta_is_allowed() {
    let gs = solve_ground_state(0.5, &grid(20.0, 2000), 1e-12).unwrap();
    let op = LinearizedOp::new(&gs).unwrap();
    assert_eq!(op.theta(), Some(0.5));
    let e = gaussian_pair(gs.grid());
    let back = op.invert(&op.apply(&e).unwrap()).unwrap();
    assert!(back.sub(&e).unwrap().sup_norm() < 1e-8);
}

#[test]
fn mismatched_grids_are_rejected() {
    let gs = cubic(1000);
    let op = LinearizedOp::new(&gs).unwrap();
    let other = gaussian_pair(&grid(20.0, 999));
    assert!(matches!(op.apply(&other), Err(Error::GridMismatch)));
    assert!(matches!(op.invert(&other), Err(Error::GridMismatch)));
}
