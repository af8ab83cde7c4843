//! Symmetric banded matrices and their Cholesky factorization.
//!
//! Both the latent covariance (compact support of the cascade kernel) and the
//! negated Hessian of the Laplace objective (truncation order `K`) are
//! symmetric positive definite with small bandwidth, so factor/solve costs
//! are `O(n b^2)` / `O(n b)`.

use crate::error::{MrwError, Result};

/// Symmetric banded matrix, lower storage: `data[d][i] = M[i + d][i]` for
/// diagonal offset `d = 0..=bandwidth`.
#[derive(Debug, Clone)]
pub(crate) struct SymBanded {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bandwidth = bandwidth.min(n.saturating_sub(1));
        SymBanded { n, bandwidth, data: vec![0.0; (bandwidth + 1) * n] }
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn idx(&self, d: usize, i: usize) -> usize {
        d * self.n + i
    }

    /// Entry `M[i][j]`; zero outside the band. Symmetric access.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.bandwidth {
            0.0
        } else {
            self.data[self.idx(d, lo)]
        }
    }

    /// Add `v` to `M[i][j]` (and by symmetry `M[j][i]`). Panics outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        debug_assert!(d <= self.bandwidth);
        let idx = self.idx(d, lo);
        self.data[idx] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        debug_assert!(d <= self.bandwidth);
        let idx = self.idx(d, lo);
        self.data[idx] = v;
    }

    /// Copies `other` into `self` (same shape required).
    pub fn copy_from_banded(&mut self, other: &SymBanded) {
        debug_assert_eq!(self.n, other.n);
        debug_assert_eq!(self.bandwidth, other.bandwidth);
        self.data.copy_from_slice(&other.data);
    }

    /// `self[i][j] += scale * u_i * u_j * other[i][j]` over the band of
    /// `other` (a Hadamard product with the rank-one matrix `u u^T`).
    pub fn add_scaled_hadamard_outer(&mut self, other: &SymBanded, u: &[f64], scale: f64) {
        debug_assert_eq!(self.n, other.n);
        debug_assert!(other.bandwidth <= self.bandwidth);
        for d in 0..=other.bandwidth {
            let src = &other.data[d * other.n..d * other.n + other.n - d];
            let dst = &mut self.data[d * self.n..d * self.n + self.n - d];
            for (i, (&s, t)) in src.iter().zip(dst.iter_mut()).enumerate() {
                *t += scale * u[i] * u[i + d] * s;
            }
        }
    }

    pub fn add_to_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self.data[i] += v;
        }
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        self.data[..self.n].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `out = M x` (symmetric multiply).
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        let b = self.bandwidth;
        for i in 0..self.n {
            out[i] = self.data[i] * x[i];
        }
        for d in 1..=b {
            let row = &self.data[d * self.n..d * self.n + self.n - d];
            for (i, &m) in row.iter().enumerate() {
                // m = M[i+d][i]
                out[i + d] += m * x[i];
                out[i] += m * x[i + d];
            }
        }
    }

    /// Quadratic form `x^T M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let b = self.bandwidth;
        let mut acc = 0.0;
        for i in 0..self.n {
            acc += self.data[i] * x[i] * x[i];
        }
        for d in 1..=b {
            let row = &self.data[d * self.n..d * self.n + self.n - d];
            let mut s = 0.0;
            for (i, &m) in row.iter().enumerate() {
                s += m * x[i] * x[i + d];
            }
            acc += 2.0 * s;
        }
        acc
    }

    /// Banded Cholesky `M = L L^T`. Fails with the offending pivot when the
    /// matrix is not numerically positive definite.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.n;
        let b = self.bandwidth;
        let mut l = vec![0.0; (b + 1) * n];
        // l[d*n + j] = L[j+d][j]
        for j in 0..n {
            let kmin = j.saturating_sub(b);
            let mut sum = self.data[j]; // M[j][j]
            for k in kmin..j {
                let v = l[(j - k) * n + k];
                sum -= v * v;
            }
            if !(sum > 0.0) || !sum.is_finite() {
                return Err(MrwError::NotPositiveDefinite { order: j, pivot: sum });
            }
            let diag = sum.sqrt();
            l[j] = diag;
            let imax = (j + b).min(n - 1);
            for i in (j + 1)..=imax {
                let mut s = self.get(i, j);
                let kmin_i = i.saturating_sub(b).max(kmin);
                for k in kmin_i..j {
                    s -= l[(i - k) * n + k] * l[(j - k) * n + k];
                }
                l[(i - j) * n + j] = s / diag;
            }
        }
        Ok(BandedCholesky { n, bandwidth: b, l })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    n: usize,
    bandwidth: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Solve `L L^T x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let b = self.bandwidth;
        let mut y = rhs.to_vec();
        // forward: L y = rhs
        for i in 0..n {
            let kmin = i.saturating_sub(b);
            let mut s = y[i];
            for k in kmin..i {
                s -= self.l[(i - k) * n + k] * y[k];
            }
            y[i] = s / self.l[i];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let imax = (i + b).min(n - 1);
            let mut s = y[i];
            for k in (i + 1)..=imax {
                s -= self.l[(k - i) * n + i] * y[k];
            }
            y[i] = s / self.l[i];
        }
        y
    }

    /// `out = L z` (used to color white noise into correlated samples).
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let b = self.bandwidth;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let kmin = i.saturating_sub(b);
            let mut s = 0.0;
            for k in kmin..=i {
                s += self.l[(i - k) * n + k] * z[k];
            }
            out[i] = s;
        }
        out
    }

    /// `log det(M) = 2 sum_i log L[i][i]`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l[..self.n].iter().map(|v| v.ln()).sum::<f64>()
    }
}
