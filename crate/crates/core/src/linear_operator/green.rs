//! Radial reductions of the Yukawa kernel G(x) = e^{-|x|}/(4π|x|) and of
//! its companion H(x) = (x₃/|x|)G(x), evaluated by split-at-ρ=r recurrences.
//!
//! For data (φ₁, φ₂) the inverse of L̃ = [[1, ∂_r + 2/r], [∂_r, 1]] is
//!
//!   r e₁ = I(r) + s₀(r) J(r),   r e₂ = (1 + 1/r) I(r) − ĩ(r) J(r),
//!
//! with I(r) = ∫₀^r e^{-(r−ρ)} [s₀(ρ)ρφ₁ + ĩ(ρ)ρφ₂] dρ,
//! J(r) = ∫_r^∞ e^{-(ρ−r)} [ρφ₁ − (ρ+1)φ₂] dρ, s₀(x) = (1 − e^{-2x})/2
//! and ĩ(x) = e^{-x}(cosh x − sinh x / x).

use crate::radial::{RadialField, RadialGrid};

/// 4-point Gauss–Legendre nodes and weights on [-1, 1].
const GAUSS: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

pub(crate) fn s0(x: f64) -> f64 {
    -0.5 * (-2.0 * x).exp_m1()
}

pub(crate) fn itilde(x: f64) -> f64 {
    if x < 0.1 {
        // cosh x − sinh x / x = Σ_{k≥1} 2k x^{2k} / (2k+1)!
        let x2 = x * x;
        let mut term = x2 / 3.0;
        let mut sum = term;
        for k in 2..8 {
            let kf = k as f64;
            term *= x2 * kf / ((kf - 1.0) * (2.0 * kf) * (2.0 * kf + 1.0));
            sum += term;
        }
        sum * (-x).exp()
    } else {
        0.5 * (1.0 + (-2.0 * x).exp()) + 0.5 * (-2.0 * x).exp_m1() / x
    }
}

/// Quadrature geometry for one grid: Gauss points of every cell
/// [r_{i-1}, r_i] (with r_0 = 0) and the cubic-Lagrange weights that
/// interpolate node data to them.
#[derive(Debug, Clone)]
pub(crate) struct CellQuadrature {
    nodes: Vec<f64>,
    /// Per cell: first node index of the 4-point interpolation stencil.
    stencil_start: Vec<usize>,
    /// Per cell and Gauss point: (ρ, weight, lagrange weights).
    points: Vec<[(f64, f64, [f64; 4]); 4]>,
}

impl CellQuadrature {
    pub fn new(grid: &RadialGrid) -> Self {
        let nodes = grid.nodes().to_vec();
        let n = nodes.len();
        let mut stencil_start = Vec::with_capacity(n);
        let mut points = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (if i == 0 { 0.0 } else { nodes[i - 1] }, nodes[i]);
            // nodes i-2..=i+1 straddle the cell [r_{i-1}, r_i]
            let start = i.saturating_sub(2).min(n - 4);
            let xs = [nodes[start], nodes[start + 1], nodes[start + 2], nodes[start + 3]];
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let cell = GAUSS.map(|(t, w)| {
                let rho = mid + half * t;
                let mut l = [1.0; 4];
                for (j, lj) in l.iter_mut().enumerate() {
                    for (k, xk) in xs.iter().enumerate() {
                        if k != j {
                            *lj *= (rho - xk) / (xs[j] - xk);
                        }
                    }
                }
                (rho, w * half, l)
            });
            stencil_start.push(start);
            points.push(cell);
        }
        Self {
            nodes,
            stencil_start,
            points,
        }
    }

    fn sample(&self, cell: usize, q: usize, values: &[f64]) -> f64 {
        let s = self.stencil_start[cell];
        let l = &self.points[cell][q].2;
        l[0] * values[s] + l[1] * values[s + 1] + l[2] * values[s + 2] + l[3] * values[s + 3]
    }

    /// Returns `(I, J)` at every node for densities
    /// `a(ρ) = ka1(ρ)φ₁ + ka2(ρ)φ₂` (left) and `b(ρ) = kb1(ρ)φ₁ + kb2(ρ)φ₂` (right).
    fn sweeps(
        &self,
        phi1: &[f64],
        phi2: Option<&[f64]>,
        left: impl Fn(f64) -> (f64, f64),
        right: impl Fn(f64) -> (f64, f64),
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.nodes.len();
        let density = |cell: usize, q: usize, k: &dyn Fn(f64) -> (f64, f64)| {
            let rho = self.points[cell][q].0;
            let (k1, k2) = k(rho);
            let mut v = k1 * self.sample(cell, q, phi1);
            if let Some(p2) = phi2 {
                v += k2 * self.sample(cell, q, p2);
            }
            v
        };
        let mut i_left = vec![0.0; n];
        let mut acc = 0.0;
        let mut prev = 0.0;
        for i in 0..n {
            let r = self.nodes[i];
            let mut cell = 0.0;
            for q in 0..4 {
                let (rho, w, _) = self.points[i][q];
                cell += w * (-(r - rho)).exp() * density(i, q, &left);
            }
            acc = acc * (-(r - prev)).exp() + cell;
            i_left[i] = acc;
            prev = r;
        }
        let mut j_right = vec![0.0; n];
        let mut acc = 0.0;
        for i in (0..n - 1).rev() {
            let r = self.nodes[i];
            let next = self.nodes[i + 1];
            let mut cell = 0.0;
            for q in 0..4 {
                let (rho, w, _) = self.points[i + 1][q];
                cell += w * (-(rho - r)).exp() * density(i + 1, q, &right);
            }
            acc = acc * (-(next - r)).exp() + cell;
            j_right[i] = acc;
        }
        (i_left, j_right)
    }

    /// (−Δ + 1)^{-1} φ for radial φ, truncated at r_max.
    pub fn yukawa(&self, phi: &[f64]) -> Vec<f64> {
        let (i_left, j_right) = self.sweeps(phi, None, |rho| (s0(rho) * rho, 0.0), |rho| (rho, 0.0));
        self.nodes
            .iter()
            .zip(i_left.iter().zip(&j_right))
            .map(|(&r, (&il, &jr))| (il + s0(r) * jr) / r)
            .collect()
    }

    /// L̃^{-1}(φ₁, φ₂).
    pub fn invert_free(&self, phi1: &[f64], phi2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (i_left, j_right) = self.sweeps(
            phi1,
            Some(phi2),
            |rho| (s0(rho) * rho, itilde(rho) * rho),
            |rho| (rho, -(rho + 1.0)),
        );
        let mut e1 = Vec::with_capacity(self.nodes.len());
        let mut e2 = Vec::with_capacity(self.nodes.len());
        for (&r, (&il, &jr)) in self.nodes.iter().zip(i_left.iter().zip(&j_right)) {
            e1.push((il + s0(r) * jr) / r);
            e2.push(((1.0 + 1.0 / r) * il - itilde(r) * jr) / r);
        }
        (e1, e2)
    }
}

/// Samples r ↦ (4πr)^{-1}e^{-r}, the radial profile of G.
pub fn yukawa_kernel(grid: &RadialGrid) -> RadialField {
    RadialField::from_fn(grid, |r| (-r).exp() / (4.0 * std::f64::consts::PI * r))
}
