//! The linearized operator
//!
//!   L e = ((1 − W)e₁ + ∂_r e₂ + 2e₂/r, ∂_r e₁ + e₂),   W = (2θ+1)Q^{2θ},
//!
//! its banded finite-difference inverse, and the kernel-based inverse of
//! the free part L̃ (W = 0) with a Krylov solve for the full operator.
//!
//! Discretization: ∂_r e₁ uses a forward-biased and ∂_r e₂ a backward-biased
//! 4-point stencil, third order at every node. The pairing makes the
//! eliminated operator a compact positive Laplacian, so the discrete L has
//! no sawtooth near-null mode (which centered stencils on a collocated grid
//! would produce). Near r = 0 the stencils reach into mirrored ghost nodes,
//! e₁ extended evenly and e₂ oddly; past r_max the ghosts follow the
//! decaying free solution e^{-r}/r, which imposes the decay condition.

mod banded;
mod gmres;
mod green;

use crate::error::{Error, Result};
use crate::ground_state::GroundState;
use crate::radial::{NormSpec, RadialField, RadialGrid};

use banded::{BandLu, BandMatrix};
pub use green::yukawa_kernel;
use green::CellQuadrature;

/// Two radial fields on one grid: an element of W^{1,p} × W^{1,p}.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    first: RadialField,
    second: RadialField,
}

impl FieldPair {
    pub fn new(first: RadialField, second: RadialField) -> Result<Self> {
        if first.grid() != second.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { first, second })
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            first: RadialField::zeros(grid),
            second: RadialField::zeros(grid),
        }
    }

    pub fn from_fns(grid: &RadialGrid, f1: impl Fn(f64) -> f64, f2: impl Fn(f64) -> f64) -> Self {
        Self {
            first: RadialField::from_fn(grid, f1),
            second: RadialField::from_fn(grid, f2),
        }
    }

    pub fn first(&self) -> &RadialField {
        &self.first
    }

    pub fn second(&self) -> &RadialField {
        &self.second
    }

    pub fn grid(&self) -> &RadialGrid {
        self.first.grid()
    }

    pub fn into_parts(self) -> (RadialField, RadialField) {
        (self.first, self.second)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::new(self.first.sub(&other.first)?, self.second.sub(&other.second)?)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::new(self.first.add(&other.first)?, self.second.add(&other.second)?)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            first: self.first.scale(c),
            second: self.second.scale(c),
        }
    }

    /// Larger of the two component norms.
    pub fn norm(&self, spec: NormSpec) -> f64 {
        self.first.norm(spec).max(self.second.norm(spec))
    }

    pub fn sup_norm(&self) -> f64 {
        self.first.sup_norm().max(self.second.sup_norm())
    }

    /// Pair norm in W^{1,4}.
    pub fn w14_norm(&self) -> f64 {
        self.norm(NormSpec::w14())
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.first.len());
        for (a, b) in self.first.values().iter().zip(self.second.values()) {
            v.push(*a);
            v.push(*b);
        }
        v
    }

    fn from_flat(grid: &RadialGrid, v: &[f64]) -> Result<Self> {
        let e1 = v.iter().step_by(2).copied().collect();
        let e2 = v.iter().skip(1).step_by(2).copied().collect();
        Self::new(RadialField::new(grid.clone(), e1)?, RadialField::new(grid.clone(), e2)?)
    }
}

/// A derivative stencil after folding ghost nodes onto real unknowns.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    idx: [usize; 4],
    w: [f64; 4],
}

impl Stencil {
    fn apply(&self, v: &[f64]) -> f64 {
        self.w.iter().zip(&self.idx).map(|(w, &i)| w * v[i]).sum()
    }
}

/// Builds the biased stencil at node `i` with offsets `lo..lo+4`.
///
/// Below the first node, `odd` selects the ghost extension: the origin
/// (value 0) then mirrored nodes with sign flip; otherwise mirrored nodes
/// without the origin. Past r_max, ghosts continue the last spacing and
/// carry the decaying profile (R/r)e^{-(r−R)} scaled to the last node.
fn biased_stencil(nodes: &[f64], i: usize, lo: isize, odd: bool) -> Stencil {
    let n = nodes.len();
    let r_max = nodes[n - 1];
    let h_last = r_max - nodes[n - 2];
    let mut xs = [0.0; 4];
    let mut map: [(Option<usize>, f64); 4] = [(None, 0.0); 4];
    for k in 0..4 {
        let j = i as isize + lo + k as isize;
        if j >= n as isize {
            let x = r_max + (j - n as isize + 1) as f64 * h_last;
            xs[k] = x;
            map[k] = (Some(n - 1), r_max / x * (r_max - x).exp());
        } else if j >= 0 {
            xs[k] = nodes[j as usize];
            map[k] = (Some(j as usize), 1.0);
        } else if odd {
            // j = -1 is the origin, j = -2 mirrors node 0, ...
            if j == -1 {
                xs[k] = 0.0;
                map[k] = (None, 0.0);
            } else {
                let m = (-j - 2) as usize;
                xs[k] = -nodes[m];
                map[k] = (Some(m), -1.0);
            }
        } else {
            let m = (-j - 1) as usize;
            xs[k] = -nodes[m];
            map[k] = (Some(m), 1.0);
        }
    }
    let w = crate::stencil::fornberg_weights(nodes[i], &xs, 1);
    let mut st = Stencil {
        idx: [i; 4],
        w: [0.0; 4],
    };
    let mut used = 0;
    for k in 0..4 {
        if let (Some(m), factor) = map[k] {
            if let Some(slot) = st.idx[..used].iter().position(|&x| x == m) {
                st.w[slot] += factor * w[1][k];
            } else {
                st.idx[used] = m;
                st.w[used] = factor * w[1][k];
                used += 1;
            }
        }
    }
    st
}

/// The operator L for a given potential W on a grid, with its banded
/// factorization computed once at construction.
#[derive(Debug, Clone)]
pub struct LinearizedOp {
    theta: Option<f64>,
    gs: Option<GroundState>,
    grid: RadialGrid,
    potential: Vec<f64>,
    d1: Vec<Stencil>,
    d2: Vec<Stencil>,
    lu: BandLu,
    quadrature: CellQuadrature,
}

impl LinearizedOp {
    /// L with W = (2θ+1)Q^{2θ} from the ground state.
    pub fn new(gs: &GroundState) -> Result<Self> {
        let theta = gs.theta();
        if theta < 1.0 {
            log::warn!("theta = {theta} < 1: L is invertible but the contraction estimates do not hold");
        }
        let w = gs.q().map(|q| (2.0 * theta + 1.0) * q.abs().powf(2.0 * theta));
        let mut op = Self::with_potential(gs.grid(), w.values())?;
        op.theta = Some(theta);
        op.gs = Some(gs.clone());
        Ok(op)
    }

    /// The free operator L̃ (W ≡ 0).
    pub fn free(grid: &RadialGrid) -> Result<Self> {
        Self::with_potential(grid, &vec![0.0; grid.len()])
    }

    /// L with an arbitrary potential sampled at the nodes.
    pub fn with_potential(grid: &RadialGrid, potential: &[f64]) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::InvalidParameter("potential length differs from grid".into()));
        }
        let nodes = grid.nodes();
        let n = nodes.len();
        let d1: Vec<Stencil> = (0..n).map(|i| biased_stencil(nodes, i, -1, false)).collect();
        let d2: Vec<Stencil> = (0..n).map(|i| biased_stencil(nodes, i, -2, true)).collect();
        let mut m = BandMatrix::zeros(2 * n, 4, 4);
        for i in 0..n {
            let (ra, rb) = (2 * i, 2 * i + 1);
            m.add(ra, 2 * i, 1.0 - potential[i]);
            m.add(ra, 2 * i + 1, 2.0 / nodes[i]);
            for k in 0..4 {
                if d2[i].w[k] != 0.0 {
                    m.add(ra, 2 * d2[i].idx[k] + 1, d2[i].w[k]);
                }
            }
            m.add(rb, 2 * i + 1, 1.0);
            for k in 0..4 {
                if d1[i].w[k] != 0.0 {
                    m.add(rb, 2 * d1[i].idx[k], d1[i].w[k]);
                }
            }
        }
        Ok(Self {
            theta: None,
            gs: None,
            grid: grid.clone(),
            potential: potential.to_vec(),
            d1,
            d2,
            lu: m.factor()?,
            quadrature: CellQuadrature::new(grid),
        })
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn ground_state(&self) -> Option<&GroundState> {
        self.gs.as_ref()
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    fn check(&self, e: &FieldPair) -> Result<()> {
        if e.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// L e at every node.
    pub fn apply(&self, e: &FieldPair) -> Result<FieldPair> {
        self.check(e)?;
        let r = self.grid.nodes();
        let (e1, e2) = (e.first.values(), e.second.values());
        let first = (0..r.len())
            .map(|i| (1.0 - self.potential[i]) * e1[i] + self.d2[i].apply(e2) + 2.0 * e2[i] / r[i])
            .collect();
        let second = (0..r.len()).map(|i| self.d1[i].apply(e1) + e2[i]).collect();
        FieldPair::new(
            RadialField::new(self.grid.clone(), first)?,
            RadialField::new(self.grid.clone(), second)?,
        )
    }

    /// Solves L e = φ with the banded factorization.
    pub fn invert(&self, phi: &FieldPair) -> Result<FieldPair> {
        self.check(phi)?;
        warn_if_not_decayed(phi.first());
        warn_if_not_decayed(phi.second());
        let mut rhs = phi.to_flat();
        self.lu.solve(&mut rhs);
        FieldPair::from_flat(&self.grid, &rhs)
    }

    /// Solves L e = φ through the kernel representation of L̃^{-1}: GMRES on
    /// the second-kind equation (I + L̃^{-1}M)e = L̃^{-1}φ, M = diag(−W, 0).
    pub fn invert_via_kernels(&self, phi: &FieldPair, tol: f64) -> Result<KernelSolve> {
        self.check(phi)?;
        let rhs = self.free_inverse(phi)?.to_flat();
        let out = gmres::gmres(|x| self.second_kind(x), &rhs, tol, 60, 600)?;
        Ok(KernelSolve {
            solution: FieldPair::from_flat(&self.grid, &out.x)?,
            iterations: out.iterations,
            relative_residual: out.relative_residual,
        })
    }

    /// Partial sums of e = Σ_k (−L̃^{-1}M)^k L̃^{-1}φ. Fails with
    /// [`Error::Divergence`] once the terms grow three times in a row and
    /// with [`Error::NotConverged`] after `max_terms`.
    pub fn invert_via_neumann(&self, phi: &FieldPair, tol: f64, max_terms: usize) -> Result<FieldPair> {
        self.check(phi)?;
        let mut term = self.free_inverse(phi)?;
        let mut sum = term.clone();
        let mut last = term.sup_norm();
        let mut growth = 0;
        for k in 1..=max_terms {
            term = self.free_inverse(&self.potential_times(&term)?)?;
            sum = sum.add(&term)?;
            let size = term.sup_norm();
            if size <= tol * sum.sup_norm() {
                return Ok(sum);
            }
            growth = if size > last { growth + 1 } else { 0 };
            if growth >= 3 {
                return Err(Error::Divergence { iteration: k });
            }
            last = size;
        }
        Err(Error::NotConverged {
            iterations: max_terms,
            last_change: last,
        })
    }

    /// −M e = (W e₁, 0), so the Neumann term is L̃^{-1}(−M e).
    fn potential_times(&self, e: &FieldPair) -> Result<FieldPair> {
        let first: Vec<f64> = e.first.values().iter().zip(&self.potential).map(|(a, w)| a * w).collect();
        FieldPair::new(RadialField::new(self.grid.clone(), first)?, RadialField::zeros(&self.grid))
    }

    fn free_inverse(&self, phi: &FieldPair) -> Result<FieldPair> {
        let (e1, e2) = self.quadrature.invert_free(phi.first.values(), phi.second.values());
        FieldPair::new(RadialField::new(self.grid.clone(), e1)?, RadialField::new(self.grid.clone(), e2)?)
    }

    fn second_kind(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.len();
        let wx: Vec<f64> = (0..n).map(|i| -self.potential[i] * x[2 * i]).collect();
        let zero = vec![0.0; n];
        let (a1, a2) = self.quadrature.invert_free(&wx, &zero);
        let mut out = x.to_vec();
        for i in 0..n {
            out[2 * i] += a1[i];
            out[2 * i + 1] += a2[i];
        }
        Ok(out)
    }
}

/// Outcome of [`LinearizedOp::invert_via_kernels`].
#[derive(Debug, Clone)]
pub struct KernelSolve {
    pub solution: FieldPair,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn warn_if_not_decayed(f: &RadialField) {
    let tail = f.values()[f.len() - 1];
    if tail.abs() > 1e-8 {
        log::warn!("data not decayed at r_max (|value| = {tail:e}); truncation pollutes the result");
    }
}

/// L e, evaluated with the operator's finite differences.
pub fn apply_l(op: &LinearizedOp, e: &FieldPair) -> Result<FieldPair> {
    op.apply(e)
}

/// L^{-1} φ by the banded direct solve.
pub fn invert_l(op: &LinearizedOp, phi: &FieldPair) -> Result<FieldPair> {
    op.invert(phi)
}

/// (−Δ + 1)^{-1} φ = G * φ for radial φ.
pub fn yukawa_convolve(phi: &RadialField) -> RadialField {
    warn_if_not_decayed(phi);
    let values = CellQuadrature::new(phi.grid()).yukawa(phi.values());
    RadialField::new(phi.grid().clone(), values).expect("finite data gives a finite convolution")
}

/// L̃^{-1} φ from the radial reductions of the kernels G and H.
pub fn invert_l_tilde(phi: &FieldPair) -> Result<FieldPair> {
    warn_if_not_decayed(phi.first());
    warn_if_not_decayed(phi.second());
    let (e1, e2) = CellQuadrature::new(phi.grid()).invert_free(phi.first.values(), phi.second.values());
    FieldPair::new(RadialField::new(phi.grid().clone(), e1)?, RadialField::new(phi.grid().clone(), e2)?)
}

/// (‖f/r‖_p, ‖∂_r f + 2f/r‖_p) with the 3D radial measure, for f vanishing
/// at the origin. The sup norm also includes both quantities extrapolated to
/// r = 0, where f/r tends to f′(0) and ∂_r f + 2f/r to 3f′(0).
pub fn hardy_check(f: &RadialField, p: f64) -> Result<(f64, f64)> {
    let spec = NormSpec::lp(p)?;
    let over_r = f.map_with_r(|r, v| v / r);
    let div = f.derivative_high_order().zip_with(&over_r, |d, q| d + 2.0 * q)?;
    if p.is_infinite() {
        let at_origin = |g: &RadialField| {
            let (r, v) = (g.nodes(), g.values());
            (v[0] - r[0] * (v[1] - v[0]) / (r[1] - r[0])).abs()
        };
        return Ok((
            over_r.sup_norm().max(at_origin(&over_r)),
            div.sup_norm().max(at_origin(&div)),
        ));
    }
    Ok((over_r.norm(spec), div.norm(spec)))
}
