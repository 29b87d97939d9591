//! Small direct and iterative solvers for the symmetric positive definite
//! systems the inner solver produces: banded Cholesky for the local kinds,
//! dense Cholesky for the fractional operator, and Jacobi-preconditioned
//! conjugate gradients for fractional Newton steps.

use crate::error::{Error, Result};

/// Symmetric banded matrix, lower diagonals stored by offset:
/// `data[d * n + i]` holds `A[i + d][i]` for `d <= bw`.
#[derive(Debug, Clone)]
pub struct Banded {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Banded {
            n,
            bw,
            data: vec![0.0; (bw + 1) * n],
        }
    }

    /// Adds `v` at `(i, j)`; only the lower triangle is stored, so callers
    /// touch each symmetric pair once with `i >= j`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.data[(i - j) * self.n + j] += v;
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            out[j] += self.data[j] * x[j];
            let top = (self.bw).min(n - 1 - j);
            for d in 1..=top {
                let a = self.data[d * n + j];
                out[j + d] += a * x[j];
                out[j] += a * x[j + d];
            }
        }
    }

    /// In-place Cholesky `A = L L^T`; fails on a non-positive pivot.
    pub fn cholesky(mut self) -> Result<BandedChol> {
        let n = self.n;
        let bw = self.bw;
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut s = self.data[j];
            for k in lo..j {
                let l = self.data[(j - k) * n + k];
                s -= l * l;
            }
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::SingularSystem { row: j, pivot: s });
            }
            let d0 = s.sqrt();
            self.data[j] = d0;
            let top = bw.min(n - 1 - j);
            for d in 1..=top {
                let i = j + d;
                let klo = i.saturating_sub(bw);
                let mut s = self.data[d * n + j];
                for k in klo..j {
                    s -= self.data[(i - k) * n + k] * self.data[(j - k) * n + k];
                }
                self.data[d * n + j] = s / d0;
            }
        }
        Ok(BandedChol {
            n,
            bw,
            l: self.data,
        })
    }
}

/// Cholesky factor of a [`Banded`] matrix.
#[derive(Debug, Clone)]
pub struct BandedChol {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedChol {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let bw = self.bw;
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= self.l[(i - k) * n + k] * y[k];
            }
            y[i] = s / self.l[i];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= self.l[(k - i) * n + i] * y[k];
            }
            y[i] = s / self.l[i];
        }
        y
    }
}

/// In-place dense Cholesky of a symmetric matrix in row-major `a` (lower
/// triangle is read and overwritten with `L`).
pub fn dense_cholesky(n: usize, a: &mut [f64]) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut s = a[j * n + j];
        for k in 0..j {
            s -= a[j * n + k] * a[j * n + k];
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::SingularSystem { row: j, pivot: s });
        }
        let d = s.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut t = a[i * n + j];
            for k in 0..j {
                t -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = t / d;
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` given the factor from [`dense_cholesky`].
pub fn dense_chol_solve(n: usize, l: &[f64], b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn linf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Jacobi-preconditioned conjugate gradients. `matvec` applies the SPD
/// operator, `diag` is its diagonal. Iterates until `||r||_inf <= tol` or
/// `maxit`; returns `(iterations, final residual)`.
pub fn pcg<F>(
    matvec: F,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    maxit: usize,
) -> (usize, f64)
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = linf(&r);
    if res <= tol {
        return (0, res);
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=maxit {
        matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return (it, res);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = linf(&r);
        if res <= tol {
            return (it, res);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (maxit, res)
}
