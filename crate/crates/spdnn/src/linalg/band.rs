//! Banded storage and LU factorization for the global tangent systems.
//!
//! LAPACK-style band layout: entry `(i, j)` lives at row `kl + ku + i - j` of
//! column `j`, with `kl` extra rows reserved for fill-in from partial
//! pivoting. Problem sizes here are small enough that a direct banded solve
//! is both deterministic and fast.

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandMat {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    /// Column-major: data[j * ldab + r].
    data: Vec<f64>,
}

impl BandMat {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMat { n, kl, ku, ldab, data: vec![0.0; n * ldab] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reset(&mut self) {
        self.data.fill(0.0);
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j + self.kl >= i && i + self.ku >= j, "entry outside band");
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || i + self.ku < j {
            return 0.0;
        }
        self.data[j * self.ldab + (self.kl + self.ku + i - j)]
    }

    /// Replaces row `i` with the identity row (Dirichlet elimination).
    pub fn set_identity_row(&mut self, i: usize) {
        let j0 = i.saturating_sub(self.kl);
        let j1 = (i + self.ku).min(self.n - 1);
        for j in j0..=j1 {
            let k = self.idx(i, j);
            self.data[k] = if i == j { 1.0 } else { 0.0 };
        }
    }

    /// Zeros column `i` except the diagonal (symmetric Dirichlet elimination).
    pub fn clear_column_offdiag(&mut self, j: usize) {
        let i0 = j.saturating_sub(self.ku);
        let i1 = (j + self.kl).min(self.n - 1);
        for i in i0..=i1 {
            if i != j {
                let k = self.idx(i, j);
                self.data[k] = 0.0;
            }
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let i0 = j.saturating_sub(self.ku);
            let i1 = (j + self.kl).min(self.n - 1);
            let col = &self.data[j * self.ldab..];
            for i in i0..=i1 {
                y[i] += col[self.kl + self.ku + i - j] * xj;
            }
        }
        y
    }

    /// `self += factor · other`; band shapes must match.
    pub fn add_scaled(&mut self, other: &BandMat, factor: f64) {
        assert_eq!(self.n, other.n);
        assert_eq!(self.kl, other.kl);
        assert_eq!(self.ku, other.ku);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += factor * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.data.iter_mut() {
            *a *= factor;
        }
    }

    /// In-place LU factorization with partial pivoting.
    pub fn lu_factor(mut self) -> Result<BandLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku; // fill-in upper bandwidth
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search within column j (offsets 0..=km below diagonal)
            let base = j * ldab + kv;
            let mut jp = 0usize;
            let mut pmax = self.data[base].abs();
            for p in 1..=km {
                let v = self.data[base + p].abs();
                if v > pmax {
                    pmax = v;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            let pivot = self.data[base + jp];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Solver(format!(
                    "banded LU: zero or non-finite pivot at column {j}"
                )));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                // swap rows j and j+jp across columns j..=ju
                for c in j..=ju {
                    let a = c * ldab + (kv + j - c);
                    let b = a + jp;
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[base];
            if km > 0 {
                let inv = 1.0 / pivot;
                for p in 1..=km {
                    self.data[base + p] *= inv;
                }
                for c in (j + 1)..=ju {
                    let head = c * ldab + (kv + j - c);
                    let temp = self.data[head];
                    if temp != 0.0 {
                        for p in 1..=km {
                            self.data[head + p] -= self.data[base + p] * temp;
                        }
                    }
                }
            }
        }
        Ok(BandLu { n, kl, kv, ldab, data: self.data, ipiv })
    }
}

/// Factorized banded matrix.
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, kv, ldab) = (self.n, self.kl, self.kv, self.ldab);
        // L solve with row interchanges
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let base = j * ldab + kv;
            let bj = b[j];
            if bj != 0.0 {
                for q in 1..=km {
                    b[j + q] -= self.data[base + q] * bj;
                }
            }
        }
        // U solve (upper bandwidth kv)
        for j in (0..n).rev() {
            let diag = self.data[j * ldab + kv];
            b[j] /= diag;
            let bj = b[j];
            if bj != 0.0 {
                let i0 = j.saturating_sub(kv);
                for i in i0..j {
                    b[i] -= self.data[j * ldab + (kv + i - j)] * bj;
                }
            }
        }
    }
}
