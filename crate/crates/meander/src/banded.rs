//! Banded LU factorization with partial pivoting, in the usual band
//! storage: entry `(i, j)` of the matrix lives at `ab[kl + ku + i - j][j]`,
//! with `kl` extra rows on top absorbing pivoting fill. Assembled once per
//! operator and reused across solves.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BandedError {
    #[error("zero pivot at column {0}: matrix is singular to working precision")]
    ZeroPivot(usize),
    #[error("entry ({i}, {j}) lies outside the band (kl = {kl}, ku = {ku})")]
    OutOfBand {
        i: usize,
        j: usize,
        kl: usize,
        ku: usize,
    },
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    /// `(2 kl + ku + 1) x n`, row-major.
    ab: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            ab: vec![0.0; (2 * kl + ku + 1) * n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) * self.n + j
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.idx(i, j)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<(), BandedError> {
        if !self.in_band(i, j) {
            return Err(BandedError::OutOfBand {
                i,
                j,
                kl: self.kl,
                ku: self.ku,
            });
        }
        let k = self.idx(i, j);
        self.ab[k] = v;
        Ok(())
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<(), BandedError> {
        if !self.in_band(i, j) {
            return Err(BandedError::OutOfBand {
                i,
                j,
                kl: self.kl,
                ku: self.ku,
            });
        }
        let k = self.idx(i, j);
        self.ab[k] += v;
        Ok(())
    }

    /// `A x` straight off the band; used for residual checks.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let jmin = i.saturating_sub(self.kl);
            let jmax = (i + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            for j in jmin..=jmax {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// LU factorization with row partial pivoting. Pivoting widens the
    /// upper band to `kl + ku`.
    pub fn factor(self) -> Result<BandedLu, BandedError> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let stride = n;
        let mut ab = self.ab;
        let mut ipiv = vec![0usize; n];

        let at = |i: usize, j: usize| (kl + ku + i - j) * stride + j;

        for k in 0..n {
            let imax = (k + kl).min(n - 1);
            let mut piv_row = k;
            let mut piv_val = ab[at(k, k)].abs();
            for i in k + 1..=imax {
                let v = ab[at(i, k)].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val == 0.0 {
                return Err(BandedError::ZeroPivot(k));
            }
            ipiv[k] = piv_row;
            if piv_row != k {
                let jmax = (k + kl + ku).min(n - 1);
                for j in k..=jmax {
                    ab.swap(at(k, j), at(piv_row, j));
                }
            }
            let pivot = ab[at(k, k)];
            for i in k + 1..=imax {
                let m = ab[at(i, k)] / pivot;
                ab[at(i, k)] = m;
                if m != 0.0 {
                    let jmax = (k + kl + ku).min(n - 1);
                    for j in k + 1..=jmax {
                        let akj = ab[at(k, j)];
                        if akj != 0.0 {
                            ab[at(i, j)] -= m * akj;
                        }
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ab,
            ipiv,
        })
    }
}

/// Factored form; `solve` applies the permuted forward/back substitution.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let stride = n;
        let at = |i: usize, j: usize| (kl + ku + i - j) * stride + j;

        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                x.swap(k, p);
            }
            let imax = (k + kl).min(n - 1);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=imax {
                    x[i] -= self.ab[at(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + kl + ku).min(n - 1);
            let mut acc = x[k];
            for j in k + 1..=jmax {
                acc -= self.ab[at(k, j)] * x[j];
            }
            x[k] = acc / self.ab[at(k, k)];
        }
    }
}
