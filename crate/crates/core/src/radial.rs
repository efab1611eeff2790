//! Radial grids and fields on (0, r_max] with the 3D radial measure 4πr²dr.
//!
//! Every norm in the crate is a norm of a radial function on ℝ³, so the
//! quadrature always carries the r² weight. Fields are assumed smooth and
//! even at the origin unless a routine says otherwise.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible node count.
pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    /// Quadratic stretching: intervals near the origin are about a third
    /// of those at r_max.
    Graded,
}

impl std::str::FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Spacing::Uniform),
            "graded" => Ok(Spacing::Graded),
            other => Err(Error::InvalidParameter(format!("unknown spacing mode '{other}'"))),
        }
    }
}

/// Strictly increasing positive nodes r₁ < … < r_N = r_max.
///
/// Cloning is cheap; the node array is shared.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Arc<[f64]>,
    spacing: Spacing,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || self.nodes == other.nodes
    }
}

impl RadialGrid {
    /// Builds a grid of `n` nodes ending at `r_max`.
    pub fn new(r_max: f64, n: usize, spacing: Spacing) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidGrid(format!("r_max must be positive, got {r_max}")));
        }
        if n < MIN_NODES {
            return Err(Error::InvalidGrid(format!("need at least {MIN_NODES} nodes, got {n}")));
        }
        let nf = n as f64;
        let nodes: Vec<f64> = match spacing {
            Spacing::Uniform => (1..=n).map(|i| r_max * i as f64 / nf).collect(),
            Spacing::Graded => (1..=n)
                .map(|i| {
                    let s = i as f64 / nf;
                    r_max * s * (s + 1.0) / 2.0
                })
                .collect(),
        };
        let mut grid = Self::from_nodes(nodes, spacing)?;
        // pin the last node exactly
        Arc::get_mut(&mut grid.nodes).unwrap()[n - 1] = r_max;
        Ok(grid)
    }

    /// Wraps an explicit node list, checking the grid invariants.
    pub fn from_nodes(nodes: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        if !(nodes[0].is_finite() && nodes[0] > 0.0) {
            return Err(Error::InvalidGrid("first node must be positive".into()));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidGrid(format!("nodes not strictly increasing at index {}", i + 1)));
        }
        Ok(Self {
            nodes: nodes.into(),
            spacing,
        })
    }

    /// The same grid with every node multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter(format!("scale factor must be positive, got {factor}")));
        }
        Self::from_nodes(self.nodes.iter().map(|r| r * factor).collect(), self.spacing)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    /// Index of the last node with r ≤ `r` (0 if `r` is below the first node).
    pub fn locate(&self, r: f64) -> usize {
        self.nodes.partition_point(|&x| x <= r).saturating_sub(1)
    }

    /// First derivative weights at node `i` from the three-point stencil
    /// (centered inside, one-sided at both ends).
    fn three_point(&self, i: usize) -> ([usize; 3], [f64; 3]) {
        let n = self.nodes.len();
        let idx = if i == 0 {
            [0, 1, 2]
        } else if i == n - 1 {
            [n - 3, n - 2, n - 1]
        } else {
            [i - 1, i, i + 1]
        };
        let xs = [self.nodes[idx[0]], self.nodes[idx[1]], self.nodes[idx[2]]];
        let w = crate::stencil::fornberg_weights(self.nodes[i], &xs, 1);
        (idx, [w[1][0], w[1][1], w[1][2]])
    }
}

/// Which norm: Lᵖ or W^{1,p}, with the 3D radial measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    p: f64,
    order: NormOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormOrder {
    Lebesgue,
    Sobolev,
}

impl NormSpec {
    pub fn new(p: f64, order: NormOrder) -> Result<Self> {
        if !(p >= 2.0) {
            return Err(Error::InvalidParameter(format!("norm exponent must be >= 2, got {p}")));
        }
        Ok(Self { p, order })
    }

    pub fn lp(p: f64) -> Result<Self> {
        Self::new(p, NormOrder::Lebesgue)
    }

    pub fn w1p(p: f64) -> Result<Self> {
        Self::new(p, NormOrder::Sobolev)
    }

    /// W^{1,4}, the space the contraction runs in.
    pub fn w14() -> Self {
        Self { p: 4.0, order: NormOrder::Sobolev }
    }

    pub fn l4() -> Self {
        Self { p: 4.0, order: NormOrder::Lebesgue }
    }

    pub fn sup() -> Self {
        Self { p: f64::INFINITY, order: NormOrder::Lebesgue }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn order(&self) -> NormOrder {
        self.order
    }
}

/// Real samples of a radial function, one per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                r: grid.nodes()[index],
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node. Panics if `f` produces a non-finite value.
    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid.clone(), values).expect("sampled function must be finite")
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map (result must stay finite).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise map with access to the radius.
    pub fn map_with_r(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .grid
                .nodes()
                .iter()
                .zip(&self.values)
                .map(|(&r, &v)| f(r, v))
                .collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// 4π∫₀^{r_max} f(r) r² dr.
    ///
    /// Panels of two intervals integrate the local quadratic interpolant of
    /// the field against r² exactly; the cell [0, r₁] uses the even
    /// quadratic c + a r² through the first two nodes.
    pub fn integrate(&self) -> f64 {
        let nodes = self.grid.nodes();
        let v = &self.values;
        let (r1, r2) = (nodes[0], nodes[1]);
        let a = (v[1] - v[0]) / (r2 * r2 - r1 * r1);
        let c = v[0] - a * r1 * r1;
        let origin = gauss3(0.0, r1, |r| (c + a * r * r) * r * r);
        4.0 * PI * (origin + self.support_integral())
    }

    /// ∫_{r₁}^{r_max} f(r) r² dr, exact for quadratic f.
    fn support_integral(&self) -> f64 {
        let x = self.grid.nodes();
        let v = &self.values;
        let n = x.len();
        let mut sum = 0.0;
        let mut i = 0;
        while i + 2 < n {
            let p = quadratic_through([x[i], x[i + 1], x[i + 2]], [v[i], v[i + 1], v[i + 2]]);
            sum += gauss3(x[i], x[i + 2], |r| p(r) * r * r);
            i += 2;
        }
        if i + 1 < n {
            let p = quadratic_through([x[n - 3], x[n - 2], x[n - 1]], [v[n - 3], v[n - 2], v[n - 1]]);
            sum += gauss3(x[n - 2], x[n - 1], |r| p(r) * r * r);
        }
        sum
    }

    /// Lᵖ or W^{1,p} norm with the measure 4πr²dr; `p = ∞` gives max |·|.
    pub fn norm(&self, spec: NormSpec) -> f64 {
        let base = lp_norm(self, spec.p);
        match spec.order {
            NormOrder::Lebesgue => base,
            NormOrder::Sobolev => {
                let deriv = lp_norm(&self.derivative(), spec.p);
                if spec.p.is_infinite() {
                    base.max(deriv)
                } else {
                    (base.powf(spec.p) + deriv.powf(spec.p)).powf(1.0 / spec.p)
                }
            }
        }
    }

    /// ∂_r by three-point differences: centered inside, one-sided at the ends.
    pub fn derivative(&self) -> Self {
        let n = self.values.len();
        let values = (0..n)
            .map(|i| {
                let (idx, w) = self.grid.three_point(i);
                w[0] * self.values[idx[0]] + w[1] * self.values[idx[1]] + w[2] * self.values[idx[2]]
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Eighth-order (9-point) derivative, for residual certificates.
    pub fn derivative_high_order(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: crate::stencil::high_order_derivative(self.grid.nodes(), &self.values, 9),
        }
    }

    /// Value at an arbitrary radius by monotone cubic Hermite interpolation.
    ///
    /// Below r₁ the field is continued through a virtual node at r = 0:
    /// even parity extrapolates quadratically in r², odd parity pins 0.
    pub fn interpolate(&self, r: f64, parity: Parity) -> Result<f64> {
        let r_max = self.grid.r_max();
        if !(r >= 0.0 && r <= r_max * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange { r, r_max });
        }
        let r = r.min(r_max);
        let nodes = self.grid.nodes();
        let vals = &self.values;
        // Cell [x_k, x_{k+1}] in the node list extended by the origin.
        let ext_x = |k: usize| if k == 0 { 0.0 } else { nodes[k - 1] };
        let origin = match parity {
            Parity::Even => {
                let (r1, r2) = (nodes[0], nodes[1]);
                let a = (vals[1] - vals[0]) / (r2 * r2 - r1 * r1);
                vals[0] - a * r1 * r1
            }
            Parity::Odd => 0.0,
        };
        let ext_y = |k: usize| if k == 0 { origin } else { vals[k - 1] };
        let m = nodes.len() + 1;
        let k = if r < nodes[0] { 0 } else { (self.grid.locate(r) + 1).min(m - 2) };
        let slope = |k: usize| -> f64 {
            // Fritsch–Butland slope at extended node k.
            if k == 0 {
                return match parity {
                    Parity::Even => 0.0,
                    Parity::Odd => pchip_end_slope(
                        ext_x(1) - ext_x(0),
                        ext_x(2) - ext_x(1),
                        (ext_y(1) - ext_y(0)) / (ext_x(1) - ext_x(0)),
                        (ext_y(2) - ext_y(1)) / (ext_x(2) - ext_x(1)),
                    ),
                };
            }
            if k == m - 1 {
                let h1 = ext_x(k) - ext_x(k - 1);
                let h0 = ext_x(k - 1) - ext_x(k - 2);
                let d1 = (ext_y(k) - ext_y(k - 1)) / h1;
                let d0 = (ext_y(k - 1) - ext_y(k - 2)) / h0;
                return pchip_end_slope(h1, h0, d1, d0);
            }
            let h0 = ext_x(k) - ext_x(k - 1);
            let h1 = ext_x(k + 1) - ext_x(k);
            let d0 = (ext_y(k) - ext_y(k - 1)) / h0;
            let d1 = (ext_y(k + 1) - ext_y(k)) / h1;
            if d0 * d1 <= 0.0 {
                0.0
            } else {
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                (w1 + w2) / (w1 / d0 + w2 / d1)
            }
        };
        let (x0, x1) = (ext_x(k), ext_x(k + 1));
        let (y0, y1) = (ext_y(k), ext_y(k + 1));
        let (m0, m1) = (slope(k), slope(k + 1));
        let h = x1 - x0;
        let t = (r - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1)
    }

    /// Resamples onto another grid (see [`RadialField::interpolate`]).
    pub fn resample(&self, target: &RadialGrid, parity: Parity) -> Result<Self> {
        let values = target
            .nodes()
            .iter()
            .map(|&r| self.interpolate(r, parity))
            .collect::<Result<Vec<_>>>()?;
        Self::new(target.clone(), values)
    }

    /// CSV with header `r,value`, 17 significant digits per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,value\n");
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(out, "{r:.16e},{v:.16e}");
        }
        out
    }

    /// Parses the output of [`RadialField::to_csv`].
    pub fn from_csv(text: &str, spacing: Spacing) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "r,value" => {}
            _ => return Err(Error::Parse("expected header 'r,value'".into())),
        }
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut cols = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Parse(format!("line {}: missing column", lineno + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            };
            nodes.push(parse(cols.next())?);
            values.push(parse(cols.next())?);
        }
        Self::new(RadialGrid::from_nodes(nodes, spacing)?, values)
    }

    pub fn to_json(&self) -> String {
        let doc = FieldJson {
            r: self.grid.nodes().to_vec(),
            values: self.values.clone(),
            spacing: self.grid.spacing(),
        };
        serde_json::to_string(&doc).expect("finite floats serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FieldJson = serde_json::from_str(text)?;
        Self::new(RadialGrid::from_nodes(doc.r, doc.spacing)?, doc.values)
    }
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    r: Vec<f64>,
    values: Vec<f64>,
    spacing: Spacing,
}

/// Behaviour of a radial component under x ↦ −x, used to continue a field
/// through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

fn pchip_end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

/// Three-point Gauss–Legendre rule on [a, b] (exact through degree 5).
fn gauss3(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const X: f64 = 0.774_596_669_241_483_4;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    half * (5.0 / 9.0 * (f(mid - half * X) + f(mid + half * X)) + 8.0 / 9.0 * f(mid))
}

fn quadratic_through(x: [f64; 3], y: [f64; 3]) -> impl Fn(f64) -> f64 {
    move |r| {
        let l0 = (r - x[1]) * (r - x[2]) / ((x[0] - x[1]) * (x[0] - x[2]));
        let l1 = (r - x[0]) * (r - x[2]) / ((x[1] - x[0]) * (x[1] - x[2]));
        let l2 = (r - x[0]) * (r - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]));
        y[0] * l0 + y[1] * l1 + y[2] * l2
    }
}

fn lp_norm(field: &RadialField, p: f64) -> f64 {
    if p.is_infinite() {
        return field.sup_norm();
    }
    field.map(|v| v.abs().powf(p)).integrate().powf(1.0 / p)
}
