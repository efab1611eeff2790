//! Picard iteration for e = L⁻¹K(ε, e) inside a trust ball, and
//! continuation of the fixed point in ε.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::GroundState;
use crate::linear_operator::{FieldPair, LinearizedOp};
use crate::nonlinearity::{eval_k, NonlinearContext};
use crate::radial::{NormSpec, RadialField};

/// Trust-ball radius used when none is configured: the W^{1,4} size of the
/// unperturbed profile (Q, −Q′). A correction that large is no longer a
/// perturbation of it.
pub fn default_delta(gs: &GroundState) -> f64 {
    FieldPair::new(gs.q().clone(), gs.q_prime().scale(-1.0))
        .map(|p| p.w14_norm())
        .unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone)]
pub struct ContractionConfig {
    /// Stop once successive iterates differ by at most this, in both the
    /// sup norm and the W^{1,4} pair norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Trust-ball radius in W^{1,4}; `None` means [`default_delta`].
    pub delta: Option<f64>,
    pub warm_start: Option<PerturbationPair>,
    /// Step weight λ in e ← (1−λ)e + λL⁻¹K(ε, e); 1 is plain Picard.
    pub relaxation: f64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            delta: None,
            warm_start: None,
            relaxation: 1.0,
        }
    }
}

impl ContractionConfig {
    fn validate(&self) -> Result<()> {
        let relaxation_ok = self.relaxation > 0.0 && self.relaxation <= 1.0;
        if !(self.tol > 0.0) || self.max_iter == 0 || !relaxation_ok || self.delta.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "need tol > 0, max_iter >= 1, delta > 0, 0 < relaxation <= 1; got {}, {}, {:?}, {}",
                self.tol, self.max_iter, self.delta, self.relaxation
            )));
        }
        Ok(())
    }

    pub fn delta_for(&self, gs: &GroundState) -> f64 {
        self.delta.unwrap_or_else(|| default_delta(gs))
    }
}

/// The correction (e₁, e₂) to (Q, −Q′) at one ε.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPair {
    e: FieldPair,
    epsilon: f64,
    theta: f64,
    w14_norm: f64,
}

impl PerturbationPair {
    pub fn new(e: FieldPair, epsilon: f64, theta: f64) -> Self {
        let w14_norm = e.w14_norm();
        Self {
            e,
            epsilon,
            theta,
            w14_norm,
        }
    }

    pub fn e1(&self) -> &RadialField {
        self.e.first()
    }

    pub fn e2(&self) -> &RadialField {
        self.e.second()
    }

    pub fn fields(&self) -> &FieldPair {
        &self.e
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn w14_norm(&self) -> f64 {
        self.w14_norm
    }

    /// CSV with header `r,e1,e2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,e1,e2\n");
        let (a, b) = (self.e1().values(), self.e2().values());
        for (i, r) in self.e1().nodes().iter().enumerate() {
            let _ = writeln!(out, "{r:.16e},{:.16e},{:.16e}", a[i], b[i]);
        }
        out
    }
}

/// One converged point of the branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub epsilon: f64,
    pub pair: PerturbationPair,
    pub iterations: usize,
    /// W^{1,4} norm of the last step.
    pub final_residual: f64,
    /// Largest ratio of successive step sizes over the second half of the
    /// iteration, ignoring steps already at rounding level.
    pub contraction_factor: f64,
    /// W^{1,4} norm of every step, in order.
    pub steps: Vec<f64>,
}

/// Steps below this multiple of the iterate size are rounding noise.
const NOISE_FLOOR: f64 = 1e-12;

fn contraction_factor(steps: &[f64], scale: f64) -> f64 {
    let floor = NOISE_FLOOR * scale.max(f64::MIN_POSITIVE);
    let ratios: Vec<f64> = steps
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| w[1] / w[0])
        .collect();
    ratios[ratios.len() / 2..].iter().copied().fold(0.0, f64::max)
}

/// Picard iteration e_{n+1} = L⁻¹K(ε, e_n) from the warm start (or zero),
/// averaged with the previous iterate when `relaxation` < 1.
pub fn fixed_point_solve(ctx: &NonlinearContext, op: &LinearizedOp, cfg: &ContractionConfig) -> Result<BranchPoint> {
    cfg.validate()?;
    if op.grid() != ctx.grid() {
        return Err(Error::GridMismatch);
    }
    if let Some(t) = op.theta() {
        if t != ctx.theta() {
            return Err(Error::ParameterMismatch(format!(
                "operator built for theta = {t}, context has {}",
                ctx.theta()
            )));
        }
    }
    let delta = cfg.delta_for(ctx.ground_state());
    let mut e = match &cfg.warm_start {
        Some(w) if w.fields().grid() != ctx.grid() => return Err(Error::GridMismatch),
        Some(w) => w.fields().clone(),
        None => FieldPair::zeros(ctx.grid()),
    };
    let mut steps = Vec::new();
    let mut growth = 0;
    for iteration in 1..=cfg.max_iter {
        let mut next = op.invert(&eval_k(ctx, &e)?)?;
        if cfg.relaxation != 1.0 {
            next = e.scale(1.0 - cfg.relaxation).add(&next.scale(cfg.relaxation))?;
        }
        let norm = next.w14_norm();
        if !(norm <= delta) {
            return Err(Error::BallEscape {
                norm,
                delta,
                iteration,
            });
        }
        let diff = next.sub(&e)?;
        let step = diff.w14_norm();
        let sup = diff.sup_norm();
        if let Some(&last) = steps.last() {
            growth = if step > last { growth + 1 } else { 0 };
        }
        steps.push(step);
        e = next;
        if step <= cfg.tol && sup <= cfg.tol {
            log::debug!("fixed point at epsilon={} after {iteration} iterations", ctx.epsilon());
            return Ok(BranchPoint {
                epsilon: ctx.epsilon(),
                contraction_factor: contraction_factor(&steps, norm),
                pair: PerturbationPair::new(e, ctx.epsilon(), ctx.theta()),
                iterations: iteration,
                final_residual: step,
                steps,
            });
        }
        if growth >= 3 {
            return Err(Error::Divergence { iteration });
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iter,
        last_change: steps.last().copied().unwrap_or(f64::NAN),
    })
}

/// ‖L e − K(ε, e)‖ evaluated with the forward operator, independently of
/// the solve path.
pub fn fixed_point_residual(ctx: &NonlinearContext, op: &LinearizedOp, e: &FieldPair, spec: NormSpec) -> Result<f64> {
    Ok(op.apply(e)?.sub(&eval_k(ctx, e)?)?.norm(spec))
}

/// The fixed points along a decreasing list of ε for one θ.
#[derive(Debug, Clone)]
pub struct Branch {
    pub theta: f64,
    pub points: Vec<BranchPoint>,
}

/// Solves for every ε in `epsilons` (strictly decreasing), the first from the
/// configured start and each later one warm-started from its predecessor
/// scaled by the ratio of the ε values.
pub fn continue_branch(gs: &GroundState, op: &LinearizedOp, epsilons: &[f64], cfg: &ContractionConfig) -> Result<Branch> {
    if epsilons.is_empty() {
        return Err(Error::InvalidParameter("empty epsilon list".into()));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("epsilons must be strictly decreasing".into()));
    }
    let mut points: Vec<BranchPoint> = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        let wrap = |source: Error| Error::Continuation {
            epsilon,
            source: Box::new(source),
        };
        let ctx = NonlinearContext::new(gs, epsilon).map_err(wrap)?;
        let mut local = cfg.clone();
        if let Some(prev) = points.last() {
            // e is linear in ε to leading order, so rescale the neighbour
            let fields = prev.pair.fields().scale(epsilon / prev.epsilon);
            local.warm_start = Some(PerturbationPair::new(fields, epsilon, gs.theta()));
        }
        let point = fixed_point_solve(&ctx, op, &local).map_err(wrap)?;
        points.push(point);
    }
    Ok(Branch {
        theta: gs.theta(),
        points,
    })
}

/// [`continue_branch`] for several ground states, one thread per θ.
pub fn continuation_sweep(ground_states: &[GroundState], epsilons: &[f64], cfg: &ContractionConfig) -> Result<Vec<Branch>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = ground_states
            .iter()
            .map(|gs| {
                s.spawn(move || {
                    let op = LinearizedOp::new(gs)?;
                    continue_branch(gs, &op, epsilons, cfg)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("branch worker panicked"))
            .collect()
    })
}

/// Least-squares line through (log ε, log y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Degenerate("need two positive points for a log-log fit".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
    })
}

impl Branch {
    /// Fit of log‖e‖_{W^{1,4}} against log ε over the points with ε > 0.
    pub fn scaling_fit(&self) -> Result<LogLogFit> {
        let eps: Vec<f64> = self.points.iter().map(|p| p.epsilon).collect();
        let norms: Vec<f64> = self.points.iter().map(|p| p.pair.w14_norm()).collect();
        loglog_fit(&eps, &norms)
    }

    /// Largest W^{1,4} distance between neighbouring points.
    pub fn max_gap(&self) -> Result<f64> {
        let mut gap: f64 = 0.0;
        for w in self.points.windows(2) {
            gap = gap.max(w[0].pair.fields().sub(w[1].pair.fields())?.w14_norm());
        }
        Ok(gap)
    }

    pub fn records(&self) -> Vec<BranchRecord> {
        self.points
            .iter()
            .map(|p| BranchRecord {
                epsilon: p.epsilon,
                theta: self.theta,
                iterations: p.iterations,
                residual: p.final_residual,
                w14_norm: p.pair.w14_norm(),
                norm_over_epsilon: if p.epsilon > 0.0 { p.pair.w14_norm() / p.epsilon } else { 0.0 },
                contraction_factor: p.contraction_factor,
            })
            .collect()
    }
}

/// Summary of a branch point for JSON export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub epsilon: f64,
    pub theta: f64,
    pub iterations: usize,
    pub residual: f64,
    pub w14_norm: f64,
    pub norm_over_epsilon: f64,
    pub contraction_factor: f64,
}

/// `epsilons` with the arithmetic midpoint inserted between neighbours.
pub fn refine_epsilons(epsilons: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * epsilons.len());
    for w in epsilons.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.extend(epsilons.last());
    out
}
