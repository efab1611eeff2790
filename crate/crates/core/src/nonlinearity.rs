//! The remainder K(ε, e) of the rescaled Dirac system around (Q, −Q′),
//! and scalar probes for the pointwise power inequalities it relies on.
//!
//! Writing v = Q + e₁ and u = −Q′ + e₂,
//!
//!   K₁ = |v|^{2θ}v − (2θ+1)Q^{2θ}e₁ − Q^{2θ+1} + (|v² − εu²|^θ − |v|^{2θ})v
//!   K₂ = ε(1 + |v² − εu²|^θ)u.
//!
//! The ratio functions return quotients whose boundedness is the content of
//! each inequality. Sweeping them over a box gives an empirical constant.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::GroundState;
use crate::linear_operator::{hardy_check, FieldPair};
use crate::radial::{Parity, RadialField, RadialGrid};

/// Parameters of one nonlinear problem: θ, ε = 1/2 − ω, and the ground state.
#[derive(Debug, Clone)]
pub struct NonlinearContext {
    theta: f64,
    epsilon: f64,
    gs: GroundState,
}

impl NonlinearContext {
    pub fn new(gs: &GroundState, epsilon: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {epsilon} outside [0, 1/2) (omega must stay positive)"
            )));
        }
        Ok(Self {
            theta: gs.theta(),
            epsilon,
            gs: gs.clone(),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// ω = m − ε with m = 1/2.
    pub fn omega(&self) -> f64 {
        0.5 - self.epsilon
    }

    pub fn ground_state(&self) -> &GroundState {
        &self.gs
    }

    pub fn grid(&self) -> &RadialGrid {
        self.gs.grid()
    }
}

/// (1+t)^p − 1 − p t without cancellation for small t, |t| < 1.
fn taylor_remainder(t: f64, p: f64) -> f64 {
    if t.abs() < 1e-4 {
        // three terms are exact to rounding here
        let c2 = p * (p - 1.0) / 2.0;
        let c3 = c2 * (p - 2.0) / 3.0;
        let c4 = c3 * (p - 3.0) / 4.0;
        t * t * (c2 + t * (c3 + t * c4))
    } else {
        (p * t.ln_1p()).exp_m1() - p * t
    }
}

/// |v|^{2θ}v − (2θ+1)|q|^{2θ}e − |q|^{2θ}q with v = q + e.
fn cubic_remainder(q: f64, e: f64, theta: f64) -> f64 {
    let p = 2.0 * theta + 1.0;
    if q != 0.0 && e.abs() < 0.5 * q.abs() {
        q.signum() * q.abs().powf(p) * taylor_remainder(e / q, p)
    } else {
        let v = q + e;
        v.abs().powf(2.0 * theta) * v - p * q.abs().powf(2.0 * theta) * e - q.abs().powf(2.0 * theta) * q
    }
}

/// (|v² − εu²|^θ − |v|^{2θ})v.
fn cone_correction(v: f64, u: f64, epsilon: f64, theta: f64) -> f64 {
    let w = epsilon * u * u;
    if v != 0.0 && w < 0.5 * v * v {
        v.abs().powf(2.0 * theta) * v * (theta * (-w / (v * v)).ln_1p()).exp_m1()
    } else {
        ((v * v - w).abs().powf(theta) - v.abs().powf(2.0 * theta)) * v
    }
}

/// K(ε, e) at every node.
pub fn eval_k(ctx: &NonlinearContext, e: &FieldPair) -> Result<FieldPair> {
    if e.grid() != ctx.grid() {
        return Err(Error::GridMismatch);
    }
    let (th, eps) = (ctx.theta, ctx.epsilon);
    let q = ctx.gs.q().values();
    let dq = ctx.gs.q_prime().values();
    let (e1, e2) = (e.first().values(), e.second().values());
    let n = q.len();
    let mut k1 = Vec::with_capacity(n);
    let mut k2 = Vec::with_capacity(n);
    for i in 0..n {
        let v = q[i] + e1[i];
        let u = -dq[i] + e2[i];
        k1.push(cubic_remainder(q[i], e1[i], th) + cone_correction(v, u, eps, th));
        k2.push(eps * (1.0 + (v * v - eps * u * u).abs().powf(th)) * u);
    }
    let grid = ctx.grid().clone();
    FieldPair::new(RadialField::new(grid.clone(), k1)?, RadialField::new(grid, k2)?)
}

fn quotient(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// |g(a+σ) − g(a) − g′(a)σ| / ((|a|^{2θ−1} + |σ|^{2θ−1})σ²) for g(t) = |t|^{2θ}t.
/// The |a| term is dropped for θ ≤ 1/2.
pub fn remainder_ratio(a: f64, sigma: f64, theta: f64) -> f64 {
    let num = cubic_remainder(a, sigma, theta).abs();
    let mut weight = sigma.abs().powf(2.0 * theta - 1.0);
    if theta > 0.5 {
        weight += a.abs().powf(2.0 * theta - 1.0);
    }
    quotient(num, weight * sigma * sigma)
}

/// ||a − b|^θ − |a|^θ| / (|a|^{θ−1}|b| + |b|^θ), the first term dropped for θ ≤ 1.
pub fn difference_ratio(a: f64, b: f64, theta: f64) -> f64 {
    let num = ((a - b).abs().powf(theta) - a.abs().powf(theta)).abs();
    let mut den = b.abs().powf(theta);
    if theta > 1.0 {
        den += a.abs().powf(theta - 1.0) * b.abs();
    }
    quotient(num, den)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Exact sign of a sum of doubles.
fn sum_sign(xs: &[f64]) -> f64 {
    let mut expansion: Vec<f64> = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut q = x;
        let mut next = Vec::with_capacity(expansion.len() + 1);
        for &c in &expansion {
            let (s, err) = two_sum(q, c);
            if err != 0.0 {
                next.push(err);
            }
            q = s;
        }
        next.push(q);
        expansion = next;
    }
    // components are nonoverlapping with the largest last
    expansion.iter().rev().find(|c| **c != 0.0).map_or(0.0, |c| c.signum())
}

/// ||a+b+c|^θ − |a+b|^θ − |a+c|^θ + |a|^θ| against the smaller of
/// (|c|^{θ−1} + |b|^{θ−1})|b| and the same with b and c swapped.
/// For θ = 1 the numerator is computed exactly. Requires 1 ≤ θ < 2.
pub fn mixed_difference_ratio(a: f64, b: f64, c: f64, theta: f64) -> Result<f64> {
    if !(1.0..2.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside [1, 2)")));
    }
    let num = if theta == 1.0 {
        // |x| = sign(x)·x, so the numerator is an integer combination of a, b, c
        let s_abc = sum_sign(&[a, b, c]);
        let s_ab = sum_sign(&[a, b]);
        let s_ac = sum_sign(&[a, c]);
        let s_a = a.signum() * f64::from(a != 0.0);
        let ka = s_abc - s_ab - s_ac + s_a;
        let kb = s_abc - s_ab;
        let kc = s_abc - s_ac;
        (ka * a + kb * b + kc * c).abs()
    } else {
        let p = |x: f64| x.abs().powf(theta);
        ((p(a + b + c) - p(a + b)) - (p(a + c) - p(a))).abs()
    };
    let w = b.abs().powf(theta - 1.0) + c.abs().powf(theta - 1.0);
    let den = (w * b.abs()).min(w * c.abs());
    Ok(quotient(num, den))
}

/// Which pointwise inequality a sweep probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// Second-order remainder of t ↦ |t|^{2θ}t.
    Remainder,
    /// First difference of t ↦ |t|^θ.
    Difference,
    /// Mixed second difference of t ↦ |t|^θ.
    MixedDifference,
}

impl Inequality {
    pub fn name(self) -> &'static str {
        match self {
            Inequality::Remainder => "remainder",
            Inequality::Difference => "difference",
            Inequality::MixedDifference => "mixed_difference",
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            Inequality::MixedDifference => 3,
            _ => 2,
        }
    }
}

/// Largest ratio seen on a sweep grid over [−extent, extent]^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub inequality: Inequality,
    pub theta: f64,
    pub extent: f64,
    pub points_per_axis: usize,
    pub points: usize,
    pub max_ratio: f64,
    pub argmax: Vec<f64>,
}

/// Smallest swept magnitude relative to the extent.
const SWEEP_DYNAMIC_RANGE: f64 = 1e-8;

/// Symmetric axis through 0. Half the positive magnitudes are uniform on
/// [extent/k, extent]; the rest continue geometrically down to
/// extent·1e-8. Several ratios approach their supremum only as one argument
/// shrinks relative to another, which a uniform axis cannot reach.
pub fn sweep_axis(extent: f64, points_per_axis: usize) -> Vec<f64> {
    let m = (points_per_axis - 1) / 2;
    let k = m.div_ceil(2);
    let mut mags: Vec<f64> = (1..=k).map(|j| extent * j as f64 / k as f64).collect();
    let bottom = extent / k as f64;
    let geometric = m - k;
    let rho = (SWEEP_DYNAMIC_RANGE * k as f64).powf(1.0 / geometric.max(1) as f64);
    mags.extend((1..=geometric).map(|j| bottom * rho.powi(j as i32)));
    mags.sort_by(f64::total_cmp);
    let mut axis: Vec<f64> = mags.iter().rev().map(|x| -x).collect();
    axis.push(0.0);
    axis.extend(mags);
    axis
}

/// Evaluates one inequality ratio on every point of the product grid built
/// from [`sweep_axis`]. `points_per_axis` must be odd and at least 5.
pub fn sweep(inequality: Inequality, theta: f64, extent: f64, points_per_axis: usize) -> Result<SweepRecord> {
    if points_per_axis < 5 || points_per_axis.is_multiple_of(2) || !(extent > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sweep needs extent > 0 and an odd point count >= 5, got {extent} and {points_per_axis}"
        )));
    }
    if inequality == Inequality::MixedDifference {
        mixed_difference_ratio(0.0, 0.0, 0.0, theta)?;
    }
    let axis = sweep_axis(extent, points_per_axis);
    let mut best = (0.0, vec![0.0; inequality.dimension()]);
    let mut points = 0;
    let mut consider = |ratio: f64, at: &[f64]| {
        points += 1;
        if ratio > best.0 || !ratio.is_finite() {
            best = (ratio, at.to_vec());
        }
    };
    for &x in &axis {
        for &y in &axis {
            match inequality {
                Inequality::Remainder => consider(remainder_ratio(x, y, theta), &[x, y]),
                Inequality::Difference => consider(difference_ratio(x, y, theta), &[x, y]),
                Inequality::MixedDifference => {
                    for &z in &axis {
                        consider(mixed_difference_ratio(x, y, z, theta)?, &[x, y, z]);
                    }
                }
            }
        }
    }
    Ok(SweepRecord {
        inequality,
        theta,
        extent,
        points_per_axis,
        points,
        max_ratio: best.0,
        argmax: best.1,
    })
}

/// CSV with header `inequality,theta,extent,points,max_ratio,argmax`;
/// the argmax coordinates are separated by `;`.
pub fn sweeps_to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("inequality,theta,extent,points,max_ratio,argmax\n");
    for r in records {
        let at: Vec<String> = r.argmax.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{},{:.16e},{}",
            r.inequality.name(),
            r.theta,
            r.extent,
            r.points,
            r.max_ratio,
            at.join(";")
        );
    }
    out
}

/// Sharp constant C_p in ‖f/r‖_p ≤ C_p‖∂_r f + 2f/r‖_p for radial f on ℝ³.
pub fn hardy_constant(p: f64) -> f64 {
    if p.is_infinite() {
        1.0 / 3.0
    } else {
        p / (3.0 * (p - 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardyRecord {
    pub p: f64,
    pub fields: usize,
    pub max_ratio: f64,
    pub sharp_constant: f64,
}

/// Random smooth decaying fields vanishing at the origin: sums of
/// c·r^k e^{−λr} with k ∈ {1, 2, 3}, λ ∈ [0.5, 3].
pub fn random_hardy_fields(grid: &RadialGrid, count: usize, seed: u64) -> Vec<RadialField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let terms: Vec<(f64, i32, f64)> = (0..3)
                .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(1..=3), rng.gen_range(0.5..3.0)))
                .collect();
            RadialField::from_fn(grid, |r| {
                terms.iter().map(|&(c, k, lam)| c * r.powi(k) * (-lam * r).exp()).sum()
            })
        })
        .collect()
}

/// Largest ‖f/r‖_p / ‖∂_r f + 2f/r‖_p over the given fields.
pub fn hardy_suite(fields: &[RadialField], p: f64) -> Result<HardyRecord> {
    let mut max_ratio: f64 = 0.0;
    for f in fields {
        let (lhs, rhs) = hardy_check(f, p)?;
        max_ratio = max_ratio.max(quotient(lhs, rhs));
    }
    Ok(HardyRecord {
        p,
        fields: fields.len(),
        max_ratio,
        sharp_constant: hardy_constant(p),
    })
}

/// Lipschitz quotient of the remainder along the two-point family that
/// defeats the contraction for θ < 1:
/// (g(s)/s)·h^{2θ} with s = ε^α, h = √ε|Q′(r₀)| and
/// g(s) = (s² + 2s)^θ − ((1+s)^{2θ} − 1).
pub fn counterexample_ratio(epsilon: f64, alpha: f64, theta: f64, gs: &GroundState, r0: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "theta = {theta}: the counterexample needs 0 < theta < 1"
        )));
    }
    if gs.theta() != theta {
        return Err(Error::ParameterMismatch(format!(
            "ground state has theta = {}, asked for {theta}",
            gs.theta()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) || !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < epsilon < 1/2 and alpha > 0, got {epsilon}, {alpha}"
        )));
    }
    let dq = gs.q_prime().interpolate(r0, Parity::Odd)?;
    let s = epsilon.powf(alpha);
    if s == 0.0 {
        return Ok(0.0);
    }
    let h = epsilon.sqrt() * dq.abs();
    let g = (s * s + 2.0 * s).powf(theta) - (2.0 * theta * s.ln_1p()).exp_m1();
    Ok(g / s * h.powf(2.0 * theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_remainder_matches_direct_evaluation() {
        for &t in &[1e-5, -3e-5, 0.01, -0.3, 0.45] {
            let direct = (1.0_f64 + t).powf(3.0) - 1.0 - 3.0 * t;
            assert!((taylor_remainder(t, 3.0) - direct).abs() < 1e-15 + 1e-12 * direct.abs());
        }
    }

    #[test]
    fn cone_correction_matches_direct_evaluation() {
        let (v, u, eps, th): (f64, f64, f64, f64) = (1.3, 0.7, 0.01, 1.5);
        let direct = ((v * v - eps * u * u).powf(th) - v.powf(2.0 * th)) * v;
        assert!((cone_correction(v, u, eps, th) - direct).abs() < 1e-14);
        // inside the cone the direct branch is used
        assert!(cone_correction(0.1, 1.0, 0.02, 1.0) < 0.0);
    }

    #[test]
    fn sum_sign_is_exact() {
        assert_eq!(sum_sign(&[1e16, 1.0, -1e16]), 1.0);
        assert_eq!(sum_sign(&[0.1, 0.2, -0.30000000000000004]), -1.0);
        assert_eq!(sum_sign(&[2.0, -2.0]), 0.0);
    }
}
