//! Direct shooting for the localized solution of the radial Dirac system
//!
//!   f′ + 2f/r = (|g² − f²|^θ − (m − ω))g,   g′ = (|g² − f²|^θ − (m + ω))f,
//!
//! with m = 1/2, on the ground-state-like branch (g > 0, decreasing).
//! Independent of the ground state and of the contraction pipeline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivp::{self, Fate, ShootingProblem};
use crate::radial::{RadialField, RadialGrid, Spacing};
use crate::stencil::parity_derivative;

/// The mass m.
pub const MASS: f64 = 0.5;

/// Largest |g(r_max)|, |f(r_max)| accepted as a decayed tail.
pub const TAIL_BOUND: f64 = 1e-6;

const MAX_BISECTIONS: usize = 200;
const SCAN_FACTOR: f64 = 1.189_207_115_002_721; // 2^{1/4}
const MAX_SCAN: usize = 400;

/// Radial profile (f, g) of a standing wave at frequency ω.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorProfile {
    f: RadialField,
    g: RadialField,
    omega: f64,
    theta: f64,
}

impl SpinorProfile {
    pub fn new(f: RadialField, g: RadialField, omega: f64, theta: f64) -> Result<Self> {
        if f.grid() != g.grid() {
            return Err(Error::GridMismatch);
        }
        check_omega(omega)?;
        if !(theta > 0.0 && theta < 2.0) {
            return Err(Error::InvalidParameter(format!("theta = {theta} outside (0, 2)")));
        }
        Ok(Self { f, g, omega, theta })
    }

    pub fn f(&self) -> &RadialField {
        &self.f
    }

    pub fn g(&self) -> &RadialField {
        &self.g
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn m(&self) -> f64 {
        MASS
    }

    /// ε = m − ω.
    pub fn epsilon(&self) -> f64 {
        MASS - self.omega
    }

    pub fn grid(&self) -> &RadialGrid {
        self.g.grid()
    }

    /// g(0), extrapolated evenly from the first two nodes.
    pub fn g0(&self) -> f64 {
        let (r, v) = (self.g.nodes(), self.g.values());
        v[0] - r[0] * r[0] * (v[1] - v[0]) / (r[1] * r[1] - r[0] * r[0])
    }

    /// CSV with header `r,f,g`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,f,g\n");
        let (f, g) = (self.f.values(), self.g.values());
        for (i, r) in self.grid().nodes().iter().enumerate() {
            let _ = writeln!(out, "{r:.16e},{:.16e},{:.16e}", f[i], g[i]);
        }
        out
    }

    pub fn header(&self) -> SpinorHeader {
        SpinorHeader {
            omega: self.omega,
            theta: self.theta,
            g0: self.g0(),
            residual: dirac_residual(self),
        }
    }

    /// Inverse of [`SpinorProfile::to_csv`].
    pub fn from_csv(text: &str, omega: f64, theta: f64, spacing: Spacing) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "r,f,g" => {}
            _ => return Err(Error::Parse("expected header 'r,f,g'".into())),
        }
        let mut cols: [Vec<f64>; 3] = Default::default();
        for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut it = line.split(',');
            for col in cols.iter_mut() {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Parse(format!("line {}: missing column", lineno + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
                col.push(v);
            }
        }
        let [r, f, g] = cols;
        let grid = RadialGrid::from_nodes(r, spacing)?;
        Self::new(RadialField::new(grid.clone(), f)?, RadialField::new(grid, g)?, omega, theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinorHeader {
    pub omega: f64,
    pub theta: f64,
    pub g0: f64,
    pub residual: f64,
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega < MASS) {
        return Err(Error::InvalidParameter(format!(
            "omega = {omega} outside (0, {MASS}); localized solutions need |omega| < m"
        )));
    }
    Ok(())
}

struct DiracProblem {
    theta: f64,
    /// m − ω
    eps: f64,
}

impl DiracProblem {
    fn kappa(&self) -> f64 {
        (self.eps * (1.0 - self.eps)).sqrt()
    }
}

impl ShootingProblem for DiracProblem {
    const MAIN: usize = 0;

    fn rhs(&self, r: f64, y: [f64; 2]) -> [f64; 2] {
        let [g, f] = y;
        let p = (g * g - f * f).abs().powf(self.theta);
        [(p - 1.0 + self.eps) * f, -2.0 * f / r + (p - self.eps) * g]
    }

    fn series(&self, g0: f64, r: f64) -> [f64; 2] {
        let (th, eps) = (self.theta, self.eps);
        let p0 = g0.powf(2.0 * th);
        let c1 = (p0 - eps) * g0 / 3.0;
        let b2 = (p0 - 1.0 + eps) * c1 / 2.0;
        let p2 = th * g0.powf(2.0 * th - 2.0) * (2.0 * g0 * b2 - c1 * c1);
        let c3 = ((p0 - eps) * b2 + p2 * g0) / 5.0;
        let b4 = ((p0 - 1.0 + eps) * c3 + p2 * c1) / 4.0;
        let r2 = r * r;
        [g0 + r2 * (b2 + r2 * b4), r * (c1 + r2 * c3)]
    }

    fn series_radius(&self, _g0: f64) -> f64 {
        0.01
    }

    fn max_step(&self, y: [f64; 2]) -> f64 {
        let p = (y[0] * y[0] - y[1] * y[1]).abs().powf(self.theta);
        0.001 / p.max(self.eps).sqrt()
    }

    fn classify(&self, g0: f64, _r: f64, y: [f64; 2]) -> Option<Fate> {
        // f < 0 makes g increase wherever the nonlinearity is weak; near the
        // core g may rise at first, so its sign is not used directly
        let [g, f] = y;
        if g < 0.0 {
            Some(Fate::Overshoot)
        } else if f < 0.0 || g > 10.0 * g0 {
            Some(Fate::Undershoot)
        } else {
            None
        }
    }

    fn tail(&self, r: f64, a: f64) -> [f64; 2] {
        let k = self.kappa();
        let g = a * (-k * r).exp() / r;
        [g, g * (k + 1.0 / r) / (1.0 - self.eps)]
    }

    fn tail_length(&self) -> f64 {
        1.0 / self.kappa()
    }
}

/// How to find the initial bracket for g(0).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum ShootStart {
    /// Geometric scan upward from ½ε^{1/(2θ)}.
    #[default]
    Scan,
    /// Scan outward from a predicted g(0), e.g. ε^{1/(2θ)}(Q(0) + e₁(0)).
    Guess(f64),
    /// Explicit bracket (undershooting, overshooting).
    Bracket(f64, f64),
}

/// Localized solution by bisection on g(0).
///
/// Bisection runs until the bracket collapses to adjacent doubles; `tol`
/// bounds the final bracket width. Check [`dirac_residual`] for quality.
pub fn shoot_dirac(omega: f64, theta: f64, grid: &RadialGrid, tol: f64) -> Result<SpinorProfile> {
    shoot_dirac_from(omega, theta, grid, tol, ShootStart::Scan)
}

pub fn shoot_dirac_from(omega: f64, theta: f64, grid: &RadialGrid, tol: f64, start: ShootStart) -> Result<SpinorProfile> {
    check_omega(omega)?;
    if !(theta > 0.0 && theta < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "theta = {theta} outside the admissible range 0 < theta < 2"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let problem = DiracProblem {
        theta,
        eps: MASS - omega,
    };
    let nodes = grid.nodes();
    let (lo, hi) = match start {
        ShootStart::Bracket(lo, hi) => (lo, hi),
        ShootStart::Scan => scan(&problem, nodes, 0.5 * problem.eps.powf(0.5 / theta))?,
        ShootStart::Guess(g0) => around(&problem, nodes, g0)?,
    };
    let shot = ivp::bisect(&problem, nodes, lo, hi, tol, MAX_BISECTIONS)?;
    let samples = ivp::assemble(&problem, nodes, &shot)?;
    let g = RadialField::new(grid.clone(), samples.iter().map(|y| y[0]).collect())?;
    let f = RadialField::new(grid.clone(), samples.iter().map(|y| y[1]).collect())?;
    let (gt, ft) = (g.values()[g.len() - 1], f.values()[f.len() - 1]);
    if !(gt.abs() < TAIL_BOUND && ft.abs() < TAIL_BOUND) {
        return Err(Error::InvalidGrid(format!(
            "r_max = {} too short: tail values ({gt:e}, {ft:e}) exceed {TAIL_BOUND:e}",
            grid.r_max()
        )));
    }
    log::debug!("dirac shot omega={omega} theta={theta}: g(0)={} after {} bisections", shot.param, shot.iterations);
    SpinorProfile::new(f, g, omega, theta)
}

fn fate(problem: &DiracProblem, nodes: &[f64], g0: f64) -> Option<Fate> {
    ivp::integrate(problem, g0, nodes).fate
}

/// Steps up from `start` until an overshoot follows an undershoot.
fn scan(problem: &DiracProblem, nodes: &[f64], start: f64) -> Result<(f64, f64)> {
    let mut lo = start;
    if fate(problem, nodes, lo) != Some(Fate::Undershoot) {
        return Err(Error::BracketNotFound { lo, hi: lo });
    }
    for _ in 0..MAX_SCAN {
        let hi = lo * SCAN_FACTOR;
        match fate(problem, nodes, hi) {
            Some(Fate::Overshoot) => return Ok((lo, hi)),
            _ => lo = hi,
        }
    }
    Err(Error::BracketNotFound { lo: start, hi: lo })
}

/// Widens [g0/w, g0·w] geometrically until it brackets.
fn around(problem: &DiracProblem, nodes: &[f64], g0: f64) -> Result<(f64, f64)> {
    if !(g0 > 0.0) {
        return Err(Error::InvalidParameter(format!("guess g(0) = {g0} must be positive")));
    }
    let mut w: f64 = 1.01;
    while w < 100.0 {
        let (lo, hi) = (g0 / w, g0 * w);
        if fate(problem, nodes, lo) == Some(Fate::Undershoot) && fate(problem, nodes, hi) == Some(Fate::Overshoot) {
            return Ok((lo, hi));
        }
        w *= w;
    }
    Err(Error::BracketNotFound {
        lo: g0 / w,
        hi: g0 * w,
    })
}

/// Sup over interior nodes of both equation residuals, with 9-point
/// derivatives mirrored through the origin (g even, f odd).
pub fn dirac_residual(profile: &SpinorProfile) -> f64 {
    let r = profile.grid().nodes();
    let (f, g) = (profile.f.values(), profile.g.values());
    let df = parity_derivative(r, f, 9, true);
    let dg = parity_derivative(r, g, 9, false);
    let eps = profile.epsilon();
    (1..r.len() - 1)
        .map(|i| {
            let p = (g[i] * g[i] - f[i] * f[i]).abs().powf(profile.theta);
            let a = df[i] + 2.0 * f[i] / r[i] - (p - eps) * g[i];
            let b = dg[i] - (p - 1.0 + eps) * f[i];
            a.abs().max(b.abs())
        })
        .fold(0.0, f64::max)
}
