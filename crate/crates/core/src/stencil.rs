//! Finite-difference weights on arbitrary node sets.

/// Fornberg's recursion: weights `w[k][j]` such that
/// `f^(k)(x0) ≈ Σ_j w[k][j] f(xs[j])` for `k = 0..=max_order`.
pub fn fornberg_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut w = vec![vec![0.0; n]; max_order + 1];
    w[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    w[k][i] = c1 * (k as f64 * w[k - 1][i - 1] - c5 * w[k][i - 1]) / c2;
                }
                w[0][i] = -c1 * c5 * w[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                w[k][j] = (c4 * w[k][j] - k as f64 * w[k - 1][j]) / c3;
            }
            w[0][j] = c4 * w[0][j] / c3;
        }
        c1 = c2;
    }
    w
}

/// First derivative from sliding `width`-point stencils (order `width - 1`
/// accurate), shifted inward near the ends of the node set.
pub fn high_order_derivative(nodes: &[f64], values: &[f64], width: usize) -> Vec<f64> {
    let n = nodes.len();
    let width = width.min(n);
    let half = width / 2;
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(half).min(n - width);
            let xs = &nodes[start..start + width];
            let w = fornberg_weights(nodes[i], xs, 1);
            w[1].iter()
                .zip(&values[start..start + width])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// As [`high_order_derivative`] for samples on r > 0 of a function with
/// known parity at the origin: the node set is mirrored to negative radii so
/// stencils near r = 0 stay centered.
pub fn parity_derivative(nodes: &[f64], values: &[f64], width: usize, odd: bool) -> Vec<f64> {
    let half = (width / 2).min(nodes.len());
    let sign = if odd { -1.0 } else { 1.0 };
    let mut xs: Vec<f64> = nodes[..half].iter().rev().map(|r| -r).collect();
    let mut ys: Vec<f64> = values[..half].iter().rev().map(|v| sign * v).collect();
    xs.extend_from_slice(nodes);
    ys.extend_from_slice(values);
    high_order_derivative(&xs, &ys, width).split_off(half)
}
