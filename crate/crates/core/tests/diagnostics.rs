use std::f64::consts::PI;

use nld_core::contraction::{fixed_point_residual, fixed_point_solve, ContractionConfig, PerturbationPair};
use nld_core::diagnostics::{
    compare_profiles, fit_decay, mass_gap, physical_to_rescaled, reconstruct_spinor, rescale_to_physical,
    ComparisonRecord, MAX_WINDOW_FRACTION,
};
use nld_core::ground_state::{solve_ground_state, GroundState};
use nld_core::linear_operator::{FieldPair, LinearizedOp};
use nld_core::nonlinearity::NonlinearContext;
use nld_core::radial::{NormSpec, RadialField, RadialGrid, Spacing};
use nld_core::shooting::{dirac_residual, SpinorProfile};
use nld_core::Error;

fn cubic() -> GroundState {
    solve_ground_state(1.0, &RadialGrid::new(20.0, 4000, Spacing::Uniform).unwrap(), 1e-12).unwrap()
}

fn zero_pair(gs: &GroundState, eps: f64) -> PerturbationPair {
    PerturbationPair::new(FieldPair::zeros(gs.grid()), eps, gs.theta())
}

#[test]
fn zero_correction_is_the_rescaled_ground_state() {
    let gs = cubic();
    let eps = 1e-2;
    let p = rescale_to_physical(&zero_pair(&gs, eps), &gs).unwrap();
    assert!((p.omega() - 0.49).abs() < 1e-15);
    assert!((p.grid().r_max() - 200.0).abs() < 1e-9);
    assert!((p.g().values()[0] - 0.1 * gs.q().values()[0]).abs() < 1e-14);
    assert!((p.f().values()[7] + eps * gs.q_prime().values()[7]).abs() < 1e-16);
    assert!((p.g0() / gs.shoot_param() - 0.1).abs() < 1e-6);
}

#[test]
fn zero_epsilon_cannot_be_rescaled() {
    let gs = cubic();
    assert!(matches!(rescale_to_physical(&zero_pair(&gs, 0.0), &gs), Err(Error::InvalidParameter(_))));
}

#[test]
fn rescaling_round_trips() {
    let gs = cubic();
    let e = FieldPair::from_fns(gs.grid(), |r| 1e-3 * (-r * r).exp(), |r| 1e-3 * r * (-r * r).exp());
    let pair = PerturbationPair::new(e, 1e-2, 1.0);
    let p = rescale_to_physical(&pair, &gs).unwrap();
    let back = physical_to_rescaled(&p, &gs).unwrap();
    assert!(back.fields().sub(pair.fields()).unwrap().sup_norm() < 1e-12);
    // through a different physical grid the monotone cubic interpolation error shows up
    let other = RadialGrid::new(200.0, 5003, Spacing::Uniform).unwrap();
    let resampled = SpinorProfile::new(
        p.f().resample(&other, nld_core::radial::Parity::Odd).unwrap(),
        p.g().resample(&other, nld_core::radial::Parity::Even).unwrap(),
        p.omega(),
        1.0,
    )
    .unwrap();
    let again = physical_to_rescaled(&resampled, &gs).unwrap();
    let err = again.fields().sub(pair.fields()).unwrap().sup_norm();
    assert!(err < 1e-4 * gs.shoot_param(), "{err}");
}

#[test]
fn physical_residual_of_a_fixed_point() {
    let gs = cubic();
    let eps = 1e-3;
    let ctx = NonlinearContext::new(&gs, eps).unwrap();
    let op = LinearizedOp::new(&gs).unwrap();
    let point = fixed_point_solve(&ctx, &op, &ContractionConfig::default()).unwrap();
    let p = rescale_to_physical(&point.pair, &gs).unwrap();
    assert!(dirac_residual(&p) <= 1e-5);
    let rescaled = fixed_point_residual(&ctx, &op, point.pair.fields(), NormSpec::sup()).unwrap();
    assert!(rescaled < 1e-10);
    // the spinor bilinear stays positive near the origin
    let s = reconstruct_spinor(&p, [0.0, 0.0, 1.0], 0.0).unwrap();
    assert!(s.bilinear() > 0.0);
}

#[test]
fn exact_exponential_rate() {
    let g = RadialGrid::new(20.0, 2000, Spacing::Uniform).unwrap();
    let fit = fit_decay(&RadialField::from_fn(&g, |r| (-2.0 * r).exp()), (0.5, 0.75)).unwrap();
    assert!((fit.rate - 2.0).abs() < 1e-3);
    assert!(fit.fit_window.0 < fit.fit_window.1);
    let yukawa = fit_decay(&RadialField::from_fn(&g, |r| 3.0 * (-0.3 * r).exp() / r), (0.5, 0.75)).unwrap();
    assert!((yukawa.rate - 0.3).abs() < 1e-6);
    assert!((yukawa.power + 1.0).abs() < 1e-6);
}

#[test]
fn fit_rejects_bad_windows() {
    let g = RadialGrid::new(20.0, 200, Spacing::Uniform).unwrap();
    let f = RadialField::from_fn(&g, |r| (-r).exp());
    assert!(matches!(fit_decay(&f, (0.5, 0.52)), Err(Error::WindowTooSmall { .. })));
    let clamped = fit_decay(&f, (0.5, MAX_WINDOW_FRACTION + 0.05)).unwrap();
    assert!(clamped.fit_window.1 <= MAX_WINDOW_FRACTION * 20.0);
    assert!(fit_decay(&f, (0.75, 0.5)).is_err());
    assert!(matches!(fit_decay(&RadialField::zeros(&g), (0.5, 0.75)), Err(Error::VanishingField)));
}

#[test]
fn perturbation_decays_no_faster_than_unit_rate() {
    let gs = cubic();
    let eps = 1e-3;
    let ctx = NonlinearContext::new(&gs, eps).unwrap();
    let op = LinearizedOp::new(&gs).unwrap();
    let point = fixed_point_solve(&ctx, &op, &ContractionConfig::default()).unwrap();
    for field in [point.pair.e1(), point.pair.e2()] {
        let nu = fit_decay(field, (0.5, 0.75)).unwrap().rate;
        assert!(nu > 0.0 && nu <= 1.05, "{nu}");
        // ν ≥ √(1 − cε) with a moderate c
        let c = (1.0 - nu * nu) / eps;
        assert!(c < 100.0, "{c}");
    }
    let p = rescale_to_physical(&point.pair, &gs).unwrap();
    let rate = fit_decay(p.g(), (0.5, 0.75)).unwrap().rate;
    assert!((rate / mass_gap(eps) - 1.0).abs() < 0.05);
}

#[test]
fn spinor_on_the_polar_axis_and_its_period() {
    let gs = cubic();
    let pair = PerturbationPair::new(FieldPair::zeros(gs.grid()), 1e-2, 1.0);
    let p = rescale_to_physical(&pair, &gs).unwrap();
    let s = reconstruct_spinor(&p, [0.0, 0.0, 3.0], 0.0).unwrap();
    let g = p.g().interpolate(3.0, nld_core::radial::Parity::Even).unwrap();
    let f = p.f().interpolate(3.0, nld_core::radial::Parity::Odd).unwrap();
    assert_eq!(s.components[0].re, g);
    assert_eq!(s.components[1].norm(), 0.0);
    assert!((s.components[2].im - f).abs() < 1e-15 && s.components[2].re == 0.0);
    assert_eq!(s.components[3].norm(), 0.0);

    let x = [1.0, -2.0, 0.5];
    let a = reconstruct_spinor(&p, x, 0.0).unwrap();
    let b = reconstruct_spinor(&p, x, 2.0 * PI / p.omega()).unwrap();
    for k in 0..4 {
        assert!((a.components[k] - b.components[k]).norm() < 1e-12);
    }
    let r = (1.0f64 + 4.0 + 0.25).sqrt();
    let g = p.g().interpolate(r, nld_core::radial::Parity::Even).unwrap();
    let f = p.f().interpolate(r, nld_core::radial::Parity::Odd).unwrap();
    assert!((a.bilinear() - (g * g - f * f)).abs() < 1e-14);
    assert!(matches!(reconstruct_spinor(&p, [300.0, 0.0, 0.0], 0.0), Err(Error::OutOfRange { .. })));
}

#[test]
fn comparison_examples() {
    let gs = cubic();
    let pair = PerturbationPair::new(FieldPair::zeros(gs.grid()), 1e-2, 1.0);
    let p = rescale_to_physical(&pair, &gs).unwrap();
    assert_eq!(compare_profiles(&p, &p).unwrap(), 0.0);
    let scaled = SpinorProfile::new(p.f().scale(1.01), p.g().scale(1.01), p.omega(), 1.0).unwrap();
    let d = compare_profiles(&p, &scaled).unwrap();
    assert!((d - 0.01 / 1.01).abs() < 1e-12 || (d - 0.01).abs() < 1e-12, "{d}");
    let other = SpinorProfile::new(p.f().clone(), p.g().clone(), 0.48, 1.0).unwrap();
    assert!(matches!(compare_profiles(&p, &other), Err(Error::ParameterMismatch(_))));
    let rec = ComparisonRecord {
        omega: 0.49,
        theta: 1.0,
        relative_difference: d,
    };
    let json = serde_json::to_string(&rec).unwrap();
    assert!(json.starts_with("{\"omega\":0.49,\"theta\":1.0,\"relative_difference\":"));
}
