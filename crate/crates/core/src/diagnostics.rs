//! Change of variables between the rescaled correction (e₁, e₂) and the
//! physical profile (f, g), tail fits, spinor reconstruction and profile
//! comparison.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contraction::PerturbationPair;
use crate::error::{Error, Result};
use crate::ground_state::GroundState;
use crate::linear_operator::FieldPair;
use crate::radial::{Parity, RadialField, RadialGrid};
use crate::shooting::{SpinorProfile, MASS};

/// Fit of log|field| ≈ intercept − rate·r + power·log r on a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    /// Algebraic prefactor exponent (−1 for a Yukawa-type tail e^{−κr}/r).
    pub power: f64,
    pub fit_window: (f64, f64),
    /// RMS of the regression residual in log|field|.
    pub residual: f64,
}

/// Upper window fractions are clamped here: the last tenth of the grid
/// feels the truncation.
pub const MAX_WINDOW_FRACTION: f64 = 0.9;

/// Exponential rate of the tail on [lo·r_max, hi·r_max].
///
/// Nodes where the field is exactly zero are skipped. The log r term
/// absorbs algebraic prefactors, which would otherwise bias the rate by
/// about 1/r on the window.
pub fn fit_decay(field: &RadialField, window_fraction: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window_fraction;
    let hi = hi.min(MAX_WINDOW_FRACTION);
    if !(lo >= 0.0 && lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "window fractions ({lo}, {hi}) must satisfy 0 <= lo < hi"
        )));
    }
    let r_max = field.grid().r_max();
    let (r_lo, r_hi) = (lo * r_max, hi * r_max);
    let window: Vec<(f64, f64)> = field
        .nodes()
        .iter()
        .zip(field.values())
        .filter(|(r, _)| **r >= r_lo && **r <= r_hi)
        .map(|(r, v)| (*r, *v))
        .collect();
    if window.len() < 10 {
        return Err(Error::WindowTooSmall { nodes: window.len() });
    }
    let pts: Vec<(f64, f64)> = window
        .iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|(r, v)| (*r, v.abs().ln()))
        .collect();
    if pts.is_empty() {
        return Err(Error::VanishingField);
    }
    if pts.len() < 10 {
        return Err(Error::WindowTooSmall { nodes: pts.len() });
    }
    // centred regressors keep the normal equations well conditioned
    let n = pts.len() as f64;
    let mr = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(r, y) in &pts {
        let (x1, x2, yy) = (r - mr, r.ln() - ml, y - my);
        a11 += x1 * x1;
        a12 += x1 * x2;
        a22 += x2 * x2;
        b1 += x1 * yy;
        b2 += x2 * yy;
    }
    let det = a11 * a22 - a12 * a12;
    if !(det.abs() > 1e-300) {
        return Err(Error::Degenerate("fit window too narrow to separate r and log r".into()));
    }
    let slope = (b1 * a22 - b2 * a12) / det;
    let power = (a11 * b2 - a12 * b1) / det;
    let intercept = my - slope * mr - power * ml;
    let rss: f64 = pts
        .iter()
        .map(|&(r, y)| (y - intercept - slope * r - power * r.ln()).powi(2))
        .sum();
    Ok(DecayFit {
        rate: -slope,
        intercept,
        power,
        fit_window: (r_lo, r_hi),
        residual: (rss / n).sqrt(),
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < MASS) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon}: the physical profile needs 0 < epsilon < 1/2"
        )));
    }
    Ok(())
}

/// f(r) = ε^{(θ+1)/(2θ)}(−Q′ + e₂)(√ε r), g(r) = ε^{1/(2θ)}(Q + e₁)(√ε r).
///
/// The physical grid is the ground-state grid stretched by 1/√ε, so no
/// interpolation is needed.
pub fn rescale_to_physical(pair: &PerturbationPair, gs: &GroundState) -> Result<SpinorProfile> {
    let (eps, theta) = (pair.epsilon(), pair.theta());
    check_epsilon(eps)?;
    if gs.theta() != theta {
        return Err(Error::ParameterMismatch(format!(
            "pair has theta = {theta}, ground state {}",
            gs.theta()
        )));
    }
    if pair.fields().grid() != gs.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = gs.grid().scaled(1.0 / eps.sqrt())?;
    let gscale = eps.powf(0.5 / theta);
    let fscale = eps.powf((theta + 1.0) / (2.0 * theta));
    let g: Vec<f64> = gs.q().values().iter().zip(pair.e1().values()).map(|(q, e)| gscale * (q + e)).collect();
    let f: Vec<f64> = gs
        .q_prime()
        .values()
        .iter()
        .zip(pair.e2().values())
        .map(|(dq, e)| fscale * (e - dq))
        .collect();
    SpinorProfile::new(
        RadialField::new(grid.clone(), f)?,
        RadialField::new(grid, g)?,
        MASS - eps,
        theta,
    )
}

/// Inverse of [`rescale_to_physical`]: samples the profile at r = ρ/√ε for
/// every node ρ of the ground-state grid and subtracts (Q, −Q′).
pub fn physical_to_rescaled(profile: &SpinorProfile, gs: &GroundState) -> Result<PerturbationPair> {
    let (eps, theta) = (profile.epsilon(), profile.theta());
    check_epsilon(eps)?;
    if gs.theta() != theta {
        return Err(Error::ParameterMismatch(format!(
            "profile has theta = {theta}, ground state {}",
            gs.theta()
        )));
    }
    let stretch = 1.0 / eps.sqrt();
    let same_nodes = profile.grid().len() == gs.grid().len()
        && profile
            .grid()
            .nodes()
            .iter()
            .zip(gs.grid().nodes())
            .all(|(a, b)| (a - b * stretch).abs() <= 1e-12 * a.abs());
    let sample = |field: &RadialField, parity: Parity| -> Result<Vec<f64>> {
        if same_nodes {
            return Ok(field.values().to_vec());
        }
        gs.grid().nodes().iter().map(|rho| field.interpolate(rho * stretch, parity)).collect()
    };
    let gscale = eps.powf(0.5 / theta);
    let fscale = eps.powf((theta + 1.0) / (2.0 * theta));
    let e1: Vec<f64> = sample(profile.g(), Parity::Even)?
        .iter()
        .zip(gs.q().values())
        .map(|(g, q)| g / gscale - q)
        .collect();
    let e2: Vec<f64> = sample(profile.f(), Parity::Odd)?
        .iter()
        .zip(gs.q_prime().values())
        .map(|(f, dq)| f / fscale + dq)
        .collect();
    let grid = gs.grid().clone();
    let pair = FieldPair::new(RadialField::new(grid.clone(), e1)?, RadialField::new(grid, e2)?)?;
    Ok(PerturbationPair::new(pair, eps, theta))
}

/// The four components of the standing wave at one point and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor4Sample {
    pub position: [f64; 3],
    pub components: [Complex64; 4],
}

impl Spinor4Sample {
    /// ψ̄ψ = |ψ₁|² + |ψ₂|² − |ψ₃|² − |ψ₄|².
    pub fn bilinear(&self) -> f64 {
        let c = &self.components;
        c[0].norm_sqr() + c[1].norm_sqr() - c[2].norm_sqr() - c[3].norm_sqr()
    }
}

/// φ(x)e^{−iωt} with φ = (g(r), 0, i f(r) cos ϑ, i f(r) sin ϑ e^{iΦ}) in
/// spherical coordinates (r, ϑ, Φ) of x.
pub fn reconstruct_spinor(profile: &SpinorProfile, position: [f64; 3], t: f64) -> Result<Spinor4Sample> {
    let [x, y, z] = position;
    let r = (x * x + y * y + z * z).sqrt();
    let g = profile.g().interpolate(r, Parity::Even)?;
    let f = profile.f().interpolate(r, Parity::Odd)?;
    let (cos_t, sin_t) = if r > 0.0 {
        (z / r, (x * x + y * y).sqrt() / r)
    } else {
        (1.0, 0.0)
    };
    let azimuth = Complex64::from_polar(1.0, y.atan2(x));
    let phase = Complex64::from_polar(1.0, -profile.omega() * t);
    let i = Complex64::i();
    let components = [
        Complex64::new(g, 0.0) * phase,
        Complex64::new(0.0, 0.0),
        i * f * cos_t * phase,
        i * f * sin_t * azimuth * phase,
    ];
    Ok(Spinor4Sample { position, components })
}

/// max over f, g of sup|a − b| / sup|finer|, on the nodes of the grid with
/// more nodes that lie inside both ranges.
pub fn compare_profiles(a: &SpinorProfile, b: &SpinorProfile) -> Result<f64> {
    if a.omega() != b.omega() || a.theta() != b.theta() {
        return Err(Error::ParameterMismatch(format!(
            "(omega, theta) = ({}, {}) vs ({}, {})",
            a.omega(),
            a.theta(),
            b.omega(),
            b.theta()
        )));
    }
    let (fine, coarse) = if a.grid().len() >= b.grid().len() { (a, b) } else { (b, a) };
    let reach = coarse.grid().r_max();
    let mut worst: f64 = 0.0;
    for (ff, cf, parity) in [(fine.f(), coarse.f(), Parity::Odd), (fine.g(), coarse.g(), Parity::Even)] {
        let mut diff: f64 = 0.0;
        for (r, v) in ff.nodes().iter().zip(ff.values()).filter(|(r, _)| **r <= reach) {
            diff = diff.max((v - cf.interpolate(*r, parity)?).abs());
        }
        let scale = ff.sup_norm();
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        } else if diff > 0.0 {
            worst = f64::INFINITY;
        }
    }
    Ok(worst)
}

/// Result of a profile comparison, for JSON export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub omega: f64,
    pub theta: f64,
    pub relative_difference: f64,
}

/// Physical decay rate √(m² − ω²) = √(ε(1 − ε)) for m = 1/2.
pub fn mass_gap(epsilon: f64) -> f64 {
    (epsilon * (1.0 - epsilon)).sqrt()
}

/// The rescaled grid stretched by 1/√ε.
pub fn physical_grid(rescaled: &RadialGrid, epsilon: f64) -> Result<RadialGrid> {
    check_epsilon(epsilon)?;
    rescaled.scaled(1.0 / epsilon.sqrt())
}
