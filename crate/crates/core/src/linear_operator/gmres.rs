//! Restarted GMRES for the second-kind equations of the kernel path.

use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone)]
pub(crate) struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` to relative residual `tol`, restarting every `restart`
/// Krylov steps.
pub(crate) fn gmres(
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut iterations = 0;
    loop {
        let ax = apply(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= tol * bnorm {
            return Ok(GmresOutcome {
                x,
                iterations,
                relative_residual: beta / bnorm,
            });
        }
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations,
                last_change: beta / bnorm,
            });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            iterations += 1;
            let mut w = apply(&v[k])?;
            // modified Gram-Schmidt, twice for stability
            for _ in 0..2 {
                for (j, vj) in v.iter().enumerate() {
                    let c = dot(&w, vj);
                    h[j][k] += c;
                    w.iter_mut().zip(vj).for_each(|(a, b)| *a -= c * b);
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= 0.1 * tol * bnorm || wn == 0.0 || iterations >= max_iter {
                break;
            }
            v.push(w.iter().map(|x| x / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&v[j]).for_each(|(a, b)| *a += yj * b);
        }
    }
}
