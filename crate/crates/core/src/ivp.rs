//! Bisection shooting for regular, decaying solutions of planar radial
//! systems y' = F(r, y) with a 2/r singularity at the origin.
//!
//! Both the NLS ground state and the Dirac profile use this engine. A
//! trajectory is integrated with RK4 from a series start, sampled at the
//! grid nodes, and classified as overshooting (the main component crosses
//! zero) or undershooting (it turns back up). Bisection collapses the
//! bracket to adjacent floating-point values; past the radius where the two
//! bracketing trajectories separate, the profile is completed by an inward
//! integration from decaying far-field data matched in amplitude.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Fate {
    /// Main component crossed zero: shoot parameter too large.
    Overshoot,
    /// Main component turned back or blew up: shoot parameter too small.
    Undershoot,
}

pub(crate) trait ShootingProblem {
    /// Index of the component that stays positive.
    const MAIN: usize;

    fn rhs(&self, r: f64, y: [f64; 2]) -> [f64; 2];
    /// Regular solution at small `r` for shoot parameter `p`.
    fn series(&self, p: f64, r: f64) -> [f64; 2];
    /// Radius below which [`ShootingProblem::series`] is accurate to rounding.
    fn series_radius(&self, p: f64) -> f64;
    /// Largest RK4 substep at state `y`.
    fn max_step(&self, y: [f64; 2]) -> f64;
    fn classify(&self, p: f64, r: f64, y: [f64; 2]) -> Option<Fate>;
    /// Decaying far-field data with amplitude `a`.
    fn tail(&self, r: f64, a: f64) -> [f64; 2];
    /// Decay length of the far field, used to bound trajectory extension.
    fn tail_length(&self) -> f64;
}

pub(crate) fn rk4(f: impl Fn(f64, [f64; 2]) -> [f64; 2], r: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let k1 = f(r, y);
    let k2 = f(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = f(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

#[derive(Debug, Clone)]
pub(crate) struct Trajectory {
    /// Samples at the leading nodes, up to the first classification.
    pub values: Vec<[f64; 2]>,
    pub fate: Option<Fate>,
}

/// Substep count for advancing from `r0` to `r1` at state `y`.
fn substeps<P: ShootingProblem>(problem: &P, r0: f64, r1: f64, y: [f64; 2]) -> usize {
    let mut h = problem.max_step(y);
    if r0 > 0.0 {
        h = h.min(0.5 * r0);
    }
    ((r1 - r0) / h).ceil().max(1.0) as usize
}

/// Advances `y` from `r0` to `r1`, stopping early at a classification.
fn advance<P: ShootingProblem>(
    problem: &P,
    p: f64,
    mut r: f64,
    r1: f64,
    mut y: [f64; 2],
) -> ([f64; 2], Option<Fate>) {
    while r < r1 {
        let k = substeps(problem, r, r1, y);
        let h = (r1 - r) / k as f64;
        // take one substep, then re-evaluate the step bound
        y = rk4(|r, y| problem.rhs(r, y), r, y, h);
        r = if k == 1 { r1 } else { r + h };
        if !(y[0].is_finite() && y[1].is_finite()) {
            return (y, Some(Fate::Undershoot));
        }
        if let Some(fate) = problem.classify(p, r, y) {
            return (y, Some(fate));
        }
    }
    (y, None)
}

pub(crate) fn integrate<P: ShootingProblem>(problem: &P, p: f64, nodes: &[f64]) -> Trajectory {
    let rs = problem.series_radius(p);
    let mut values = Vec::with_capacity(nodes.len());
    let (mut r, mut y) = if nodes[0] <= rs {
        (nodes[0], problem.series(p, nodes[0]))
    } else {
        (rs, problem.series(p, rs))
    };
    for &node in nodes {
        if node > r {
            let (next, fate) = advance(problem, p, r, node, y);
            if fate.is_some() {
                return Trajectory { values, fate };
            }
            y = next;
            r = node;
        }
        values.push(y);
    }
    // keep going until the trajectory declares itself
    let limit = r + 40.0 * problem.tail_length();
    let stride = problem.tail_length();
    while r < limit {
        let (next, fate) = advance(problem, p, r, r + stride, y);
        if fate.is_some() {
            return Trajectory { values, fate };
        }
        y = next;
        r += stride;
    }
    Trajectory { values, fate: None }
}

#[derive(Debug, Clone)]
pub(crate) struct Shot {
    pub param: f64,
    pub lo: Trajectory,
    pub hi: Trajectory,
    pub iterations: usize,
}

/// Bisects `[lo, hi]` until the bracket collapses to adjacent doubles.
pub(crate) fn bisect<P: ShootingProblem>(
    problem: &P,
    nodes: &[f64],
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Shot> {
    let mut lo_traj = integrate(problem, lo, nodes);
    let mut hi_traj = integrate(problem, hi, nodes);
    if lo_traj.fate != Some(Fate::Undershoot) || hi_traj.fate != Some(Fate::Overshoot) {
        return Err(Error::BracketNotFound { lo, hi });
    }
    let mut iterations = 0;
    while iterations < max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let traj = integrate(problem, mid, nodes);
        match traj.fate {
            Some(Fate::Undershoot) => {
                lo = mid;
                lo_traj = traj;
            }
            Some(Fate::Overshoot) => {
                hi = mid;
                hi_traj = traj;
            }
            None => {
                lo = mid;
                hi = mid;
                lo_traj = traj.clone();
                hi_traj = traj;
                break;
            }
        }
    }
    if hi - lo > tol {
        return Err(Error::NotConverged {
            iterations,
            last_change: hi - lo,
        });
    }
    Ok(Shot {
        param: 0.5 * (lo + hi),
        lo: lo_traj,
        hi: hi_traj,
        iterations,
    })
}

/// Relative agreement of the bracketing trajectories that still counts as
/// resolved by the shooting.
const MATCH_TOL: f64 = 1e-9;

/// Samples of the decaying solution at every node.
pub(crate) fn assemble<P: ShootingProblem>(problem: &P, nodes: &[f64], shot: &Shot) -> Result<Vec<[f64; 2]>> {
    let k = P::MAIN;
    let (lo, hi) = (&shot.lo.values, &shot.hi.values);
    let common = lo.len().min(hi.len());
    let agree = |i: usize| {
        let (a, b) = (lo[i][k], hi[i][k]);
        (a - b).abs() <= MATCH_TOL * 0.5 * (a.abs() + b.abs())
    };
    let resolved = (0..common).take_while(|&i| agree(i)).count();
    if resolved == 0 {
        return Err(Error::Degenerate("shooting resolved no grid node".into()));
    }
    let n = nodes.len();
    let mut out: Vec<[f64; 2]> = lo[..resolved].to_vec();
    if resolved == n {
        return Ok(out);
    }
    let m = resolved - 1;
    let target = out[m][k];
    let inward = |a: f64| -> Vec<[f64; 2]> {
        let mut ys = vec![[0.0; 2]; n - m];
        let mut y = problem.tail(nodes[n - 1], a);
        ys[n - m - 1] = y;
        for j in (m..n - 1).rev() {
            let (r0, r1) = (nodes[j + 1], nodes[j]);
            let steps = ((r0 - r1) / problem.max_step(y)).ceil().max(1.0) as usize;
            let h = (r1 - r0) / steps as f64;
            for s in 0..steps {
                y = rk4(|r, y| problem.rhs(r, y), r0 + s as f64 * h, y, h);
            }
            ys[j - m] = y;
        }
        ys
    };
    // The far field is linear up to negligible terms, so a couple of
    // secant steps pin the amplitude.
    let mut a0 = target / problem.tail(nodes[m], 1.0)[k];
    let mut ys = inward(a0);
    let mut f0 = ys[0][k] - target;
    let mut a1 = a0 * target / ys[0][k];
    for _ in 0..20 {
        ys = inward(a1);
        let f1 = ys[0][k] - target;
        if f1.abs() <= 1e-15 * target.abs() || f1 == f0 {
            break;
        }
        let a2 = a1 - f1 * (a1 - a0) / (f1 - f0);
        a0 = a1;
        f0 = f1;
        a1 = a2;
    }
    out.extend_from_slice(&ys[1..]);
    Ok(out)
}
