//! The positive radial ground state Q of −ΔQ + Q = |Q|^{2θ}Q on ℝ³.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivp::{self, Fate, ShootingProblem};
use crate::radial::{RadialField, RadialGrid, Spacing};
use crate::stencil::parity_derivative;

/// Largest Q(r_max) accepted as a decayed tail.
pub const TAIL_BOUND: f64 = 1e-6;

const MAX_BISECTIONS: usize = 200;

/// Q and Q′ sampled on a grid, with the shooting value Q(0).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    theta: f64,
    q: RadialField,
    q_prime: RadialField,
    shoot_param: f64,
    residual: f64,
}

impl GroundState {
    /// Wraps a given profile without solving anything. Only shapes are
    /// checked, so this also admits non-solutions (useful as probes).
    pub fn from_parts(theta: f64, q: RadialField, q_prime: RadialField, shoot_param: f64) -> Result<Self> {
        if q.grid() != q_prime.grid() {
            return Err(Error::GridMismatch);
        }
        let residual = ode_residual(theta, &q, &q_prime);
        Ok(Self {
            theta,
            q,
            q_prime,
            shoot_param,
            residual,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn q(&self) -> &RadialField {
        &self.q
    }

    pub fn q_prime(&self) -> &RadialField {
        &self.q_prime
    }

    /// Q(0).
    pub fn shoot_param(&self) -> f64 {
        self.shoot_param
    }

    pub fn grid(&self) -> &RadialGrid {
        self.q.grid()
    }

    /// Sup of the ODE residual over interior nodes (see [`ode_residual`]).
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// CSV with header `r,q,q_prime`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,q,q_prime\n");
        for ((r, q), dq) in self.q.nodes().iter().zip(self.q.values()).zip(self.q_prime.values()) {
            let _ = writeln!(out, "{r:.16e},{q:.16e},{dq:.16e}");
        }
        out
    }

    pub fn header(&self) -> GroundStateHeader {
        GroundStateHeader {
            theta: self.theta,
            shoot_param: self.shoot_param,
            residual: self.residual,
        }
    }

    /// Inverse of [`GroundState::to_csv`] plus [`GroundState::header`].
    pub fn from_csv(text: &str, header: &GroundStateHeader, spacing: Spacing) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "r,q,q_prime" => {}
            _ => return Err(Error::Parse("expected header 'r,q,q_prime'".into())),
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
        let [r, q, dq] = cols;
        let grid = RadialGrid::from_nodes(r, spacing)?;
        Self::from_parts(
            header.theta,
            RadialField::new(grid.clone(), q)?,
            RadialField::new(grid, dq)?,
            header.shoot_param,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateHeader {
    pub theta: f64,
    pub shoot_param: f64,
    pub residual: f64,
}

struct NlsProblem {
    theta: f64,
}

impl ShootingProblem for NlsProblem {
    const MAIN: usize = 0;

    fn rhs(&self, r: f64, y: [f64; 2]) -> [f64; 2] {
        let [q, p] = y;
        [p, -2.0 * p / r + q - q.abs().powf(2.0 * self.theta) * q]
    }

    fn series(&self, q0: f64, r: f64) -> [f64; 2] {
        let th = self.theta;
        let w = q0.powf(2.0 * th);
        let a = (q0 - w * q0) / 6.0;
        let b = a * (1.0 - (2.0 * th + 1.0) * w) / 20.0;
        let c = (b * (1.0 - (2.0 * th + 1.0) * w) - th * (2.0 * th + 1.0) * w / q0 * a * a) / 42.0;
        let r2 = r * r;
        [
            q0 + r2 * (a + r2 * (b + r2 * c)),
            r * (2.0 * a + r2 * (4.0 * b + 6.0 * c * r2)),
        ]
    }

    fn series_radius(&self, q0: f64) -> f64 {
        0.01 * q0.powf(-self.theta).min(1.0)
    }

    fn max_step(&self, y: [f64; 2]) -> f64 {
        0.001 * y[0].abs().powf(-self.theta).min(1.0)
    }

    fn classify(&self, q0: f64, _r: f64, y: [f64; 2]) -> Option<Fate> {
        let [q, p] = y;
        if q < 0.0 {
            Some(Fate::Overshoot)
        } else if p > 0.0 || q > 10.0 * q0 {
            Some(Fate::Undershoot)
        } else {
            None
        }
    }

    fn tail(&self, r: f64, a: f64) -> [f64; 2] {
        let q = a * (-r).exp() / r;
        [q, -(1.0 + 1.0 / r) * q]
    }

    fn tail_length(&self) -> f64 {
        1.0
    }
}

/// Default bracket for Q(0): the lower end always undershoots (Q(0) < 1
/// makes Q″(0) > 0); the upper end doubles from 2 until it overshoots.
fn default_bracket(problem: &NlsProblem, nodes: &[f64]) -> Result<(f64, f64)> {
    let lo = 0.5;
    let mut hi = 2.0;
    while hi < 1e12 {
        if ivp::integrate(problem, hi, nodes).fate == Some(Fate::Overshoot) {
            return Ok((lo, hi));
        }
        hi *= 2.0;
    }
    Err(Error::BracketNotFound { lo, hi })
}

/// Ground state by bisection shooting on Q(0), with the default bracket.
///
/// Bisection runs until the bracket collapses to adjacent doubles, so `tol`
/// only bounds the final bracket width. The quality certificate is
/// [`GroundState::residual`].
pub fn solve_ground_state(theta: f64, grid: &RadialGrid, tol: f64) -> Result<GroundState> {
    solve_ground_state_in(theta, grid, tol, None)
}

/// As [`solve_ground_state`], starting from an explicit bracket `(lo, hi)`.
pub fn solve_ground_state_in(
    theta: f64,
    grid: &RadialGrid,
    tol: f64,
    bracket: Option<(f64, f64)>,
) -> Result<GroundState> {
    if !(theta > 0.0 && theta < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "theta = {theta} outside the admissible range 0 < theta < 2"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let problem = NlsProblem { theta };
    let nodes = grid.nodes();
    let (lo, hi) = match bracket {
        Some(b) => b,
        None => default_bracket(&problem, nodes)?,
    };
    let shot = ivp::bisect(&problem, nodes, lo, hi, tol, MAX_BISECTIONS)?;
    let samples = ivp::assemble(&problem, nodes, &shot)?;
    let q = RadialField::new(grid.clone(), samples.iter().map(|y| y[0]).collect())?;
    let q_prime = RadialField::new(grid.clone(), samples.iter().map(|y| y[1]).collect())?;
    let tail = q.values()[q.len() - 1];
    if !(tail.abs() < TAIL_BOUND) {
        return Err(Error::InvalidGrid(format!(
            "r_max = {} too short: Q(r_max) = {tail:e} exceeds {TAIL_BOUND:e}",
            grid.r_max()
        )));
    }
    log::debug!("ground state theta={theta}: Q(0)={} after {} bisections", shot.param, shot.iterations);
    GroundState::from_parts(theta, q, q_prime, shot.param)
}

/// Sup over interior nodes of |D(Q′) + 2Q′/r − Q + |Q|^{2θ}Q| and |D(Q) − Q′|,
/// with D the 9-point derivative (mirrored through the origin by parity).
pub fn ode_residual(theta: f64, q: &RadialField, q_prime: &RadialField) -> f64 {
    let r = q.nodes();
    let dq = parity_derivative(r, q.values(), 9, false);
    let ddq = parity_derivative(r, q_prime.values(), 9, true);
    let (qv, pv) = (q.values(), q_prime.values());
    (1..r.len() - 1)
        .map(|i| {
            let e1 = ddq[i] + 2.0 * pv[i] / r[i] - qv[i] + qv[i].abs().powf(2.0 * theta) * qv[i];
            let e2 = dq[i] - pv[i];
            e1.abs().max(e2.abs())
        })
        .fold(0.0, f64::max)
}

/// Relative residuals of the two integral identities
/// ∫|∇Q|² + ∫Q² = ∫Q^{2θ+2} and ½∫|∇Q|² + (3/2)∫Q² = 3/(2θ+2)∫Q^{2θ+2},
/// both divided by ∫Q^{2θ+2}. Absolute values are returned.
pub fn pohozaev_residuals(gs: &GroundState) -> Result<(f64, f64)> {
    let p = 2.0 * gs.theta + 2.0;
    let grad = gs.q_prime.map(|d| d * d).integrate();
    let mass = gs.q.map(|q| q * q).integrate();
    let pot = gs.q.map(|q| q.abs().powf(p)).integrate();
    if !(pot > 0.0) {
        return Err(Error::Degenerate("profile has zero potential energy".into()));
    }
    let first = (grad + mass - pot) / pot;
    let second = (0.5 * grad + 1.5 * mass - 3.0 / p * pot) / pot;
    Ok((first.abs(), second.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_satisfies_ode_to_high_order() {
        let pb = NlsProblem { theta: 1.0 };
        let q0 = 4.3;
        for &r in &[1e-3, 3e-3] {
            let y = pb.series(q0, r);
            let h = 1e-5;
            let yp = pb.series(q0, r + h);
            let ym = pb.series(q0, r - h);
            let qpp = (yp[1] - ym[1]) / (2.0 * h);
            let res = qpp + 2.0 * y[1] / r - y[0] + y[0].powi(3);
            assert!(res.abs() < 1e-4, "r={r}: {res}");
        }
    }

    #[test]
    fn classification_extremes() {
        let g = RadialGrid::new(10.0, 200, Spacing::Uniform).unwrap();
        let pb = NlsProblem { theta: 1.0 };
        assert_eq!(ivp::integrate(&pb, 0.9, g.nodes()).fate, Some(Fate::Undershoot));
        assert_eq!(ivp::integrate(&pb, 8.0, g.nodes()).fate, Some(Fate::Overshoot));
    }
}
