//! LU factorization with partial pivoting for banded matrices.

use crate::error::{Error, Result};

/// Row-major band storage: row `i` keeps columns `i - kl ..= i + ku + kl`,
/// the extra `kl` upper diagonals absorbing pivoting fill-in.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i}, {j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` to entry (i, j); `j - i` must lie in `[-kl, ku]`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside declared band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() || best < scale * 1e-14 {
                return Err(Error::SingularMatrix { row: k });
            }
            pivots[k] = p;
            let jmax = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[self.slot(k, k)];
            for i in k + 1..=last {
                let sik = self.slot(i, k);
                let l = self.data[sik] / piv;
                self.data[sik] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let (sij, skj) = (self.slot(i, j), self.slot(k, j));
                        self.data[sij] -= l * self.data[skj];
                    }
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &mut [f64]) {
        let m = &self.m;
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        assert_eq!(rhs.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                rhs.swap(k, p);
            }
            let bk = rhs[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    rhs[i] -= m.data[m.slot(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = rhs[k];
            for j in k + 1..=(k + ku + kl).min(n - 1) {
                s -= m.data[m.slot(k, j)] * rhs[j];
            }
            rhs[k] = s / m.data[m.slot(k, k)];
        }
    }
}
