//! Independent ground truth: a dense symmetric eigensolver for the p = 2
//! pencils, direct Rayleigh-quotient minimization on the Y-unit sphere for
//! general p, and a brute-force double sum for the truncated fractional
//! seminorm.
//!
//! Nothing here calls `apply_a`, the inner solver, or the iteration engine;
//! matrices, energies, and gradients are assembled from the grid definition
//! from scratch so that agreement with the production path is evidence, not
//! tautology.

mod symeig;

use crate::error::{Error, Result};
use crate::operators::OperatorPair;
use crate::space::{Field, ProblemKind};

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Minimum of the Rayleigh quotient over the discrete Y-unit sphere.
    pub mu_hat: f64,
    /// Minimizer, unit in Y, sign-fixed so the dominant entry is >= 0.
    pub w_hat: Field,
    pub method: &'static str,
    /// Final first-order optimality `||g/p - mu_hat * b/q||_inf` where g, b
    /// are the gradients of the two p-th/q-th power norms.
    pub optimality: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out; `mu_hat` is then the best
    /// value found, not a certified minimum.
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Stop when the optimality measure falls below `tol * max(1, mu)`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            tol: 1e-8,
            max_iters: 100_000,
        }
    }
}

fn phi(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.abs().powf(p - 2.0) * t
    }
}

/// Distance-indexed kernel and exterior weights for the truncated Gagliardo
/// sum, rebuilt here without touching the operator module's table.
fn gagliardo_kernel(m: usize, p: f64, s: f64, radius: f64) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / m as f64;
    let layers = ((radius * m as f64).round() as usize).max(1);
    let dmax = (m - 2) + layers;
    let mut k = vec![0.0; dmax + 1];
    for (d, kd) in k.iter_mut().enumerate().skip(1) {
        *kd = h * h / (d as f64 * h).powf(1.0 + s * p);
    }
    let n = m - 1;
    let mut w_ext = vec![0.0; n];
    for (idx, w) in w_ext.iter_mut().enumerate() {
        let i = idx + 1;
        for d in i..i + layers {
            *w += k[d];
        }
        for d in (m - i)..(m - i) + layers {
            *w += k[d];
        }
    }
    (k, w_ext)
}

/// Energies and gradients of `x_norm^p` and `y_norm_pow` assembled directly
/// from the grid definition, for the minimizer below.
struct Evaluator {
    kind: ProblemKind,
    m: usize,
    h: f64,
    p: f64,
    q: f64,
    kernel: Option<(Vec<f64>, Vec<f64>)>,
}

impl Evaluator {
    fn for_pair(pair: &OperatorPair) -> Evaluator {
        let g = pair.grid();
        let e = pair.exponents();
        let kernel = if g.kind == ProblemKind::Fractional1d {
            let s = e.s.expect("fractional exponent present");
            let radius = pair.truncation_radius().unwrap_or(1.0);
            Some(gagliardo_kernel(g.m, e.p, s, radius))
        } else {
            None
        };
        Evaluator {
            kind: g.kind,
            m: g.m,
            h: g.h(),
            p: e.p,
            q: e.q,
            kernel,
        }
    }

    fn xpow(&self, v: &[f64]) -> f64 {
        let (m, h, p) = (self.m, self.h, self.p);
        match self.kind {
            ProblemKind::Dirichlet1d => {
                let at = |i: usize| if i == 0 || i == m { 0.0 } else { v[i - 1] };
                (0..m)
                    .map(|c| h * ((at(c + 1) - at(c)) / h).abs().powf(p))
                    .sum()
            }
            ProblemKind::Steklov1d => {
                let cells: f64 = (0..m)
                    .map(|c| h * ((v[c + 1] - v[c]) / h).abs().powf(p))
                    .sum();
                let mass: f64 = v
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let theta = if i == 0 || i == m { 0.5 } else { 1.0 };
                        theta * h * x.abs().powf(p)
                    })
                    .sum();
                cells + mass
            }
            ProblemKind::Dirichlet2d => {
                let w = m - 1;
                let at = |ix: usize, iy: usize| -> f64 {
                    if ix == 0 || ix == m || iy == 0 || iy == m {
                        0.0
                    } else {
                        v[(iy - 1) * w + (ix - 1)]
                    }
                };
                let mut sum = 0.0;
                for cy in 0..m {
                    for cx in 0..m {
                        let a = at(cx, cy);
                        let dx = (at(cx + 1, cy) - a) / h;
                        let dy = (at(cx, cy + 1) - a) / h;
                        sum += h * h * (dx * dx + dy * dy).powf(p / 2.0);
                    }
                }
                sum
            }
            ProblemKind::Fractional1d => {
                let (k, w_ext) = self.kernel.as_ref().expect("kernel");
                let n = v.len();
                let mut sum = 0.0;
                for i in 0..n {
                    for j in i + 1..n {
                        sum += 2.0 * k[j - i] * (v[i] - v[j]).abs().powf(self.p);
                    }
                    sum += 2.0 * w_ext[i] * v[i].abs().powf(self.p);
                }
                sum
            }
        }
    }

    /// Gradient of `xpow` (note: of the full p-th power, not of `xpow / p`).
    fn grad_x(&self, v: &[f64]) -> Vec<f64> {
        let (m, h, p) = (self.m, self.h, self.p);
        let mut g = vec![0.0; v.len()];
        match self.kind {
            ProblemKind::Dirichlet1d => {
                let at = |i: usize| if i == 0 || i == m { 0.0 } else { v[i - 1] };
                let scale = p * h.powf(1.0 - p);
                for i in 1..m {
                    g[i - 1] = scale * (phi(at(i) - at(i - 1), p) - phi(at(i + 1) - at(i), p));
                }
            }
            ProblemKind::Steklov1d => {
                let scale = p * h.powf(1.0 - p);
                for i in 0..=m {
                    let left = if i > 0 { phi(v[i] - v[i - 1], p) } else { 0.0 };
                    let right = if i < m { phi(v[i + 1] - v[i], p) } else { 0.0 };
                    let theta = if i == 0 || i == m { 0.5 } else { 1.0 };
                    g[i] = scale * (left - right) + theta * h * p * phi(v[i], p);
                }
            }
            ProblemKind::Dirichlet2d => {
                let w = m - 1;
                let at = |ix: usize, iy: usize| -> f64 {
                    if ix == 0 || ix == m || iy == 0 || iy == m {
                        0.0
                    } else {
                        v[(iy - 1) * w + (ix - 1)]
                    }
                };
                let mut add = |ix: usize, iy: usize, val: f64| {
                    if ix >= 1 && ix <= m - 1 && iy >= 1 && iy <= m - 1 {
                        g[(iy - 1) * w + (ix - 1)] += val;
                    }
                };
                for cy in 0..m {
                    for cx in 0..m {
                        let a = at(cx, cy);
                        let dx = (at(cx + 1, cy) - a) / h;
                        let dy = (at(cx, cy + 1) - a) / h;
                        let r2 = dx * dx + dy * dy;
                        if r2 == 0.0 {
                            continue;
                        }
                        let f = h * p * r2.powf((p - 2.0) / 2.0);
                        add(cx, cy, -f * (dx + dy));
                        add(cx + 1, cy, f * dx);
                        add(cx, cy + 1, f * dy);
                    }
                }
            }
            ProblemKind::Fractional1d => {
                let (k, w_ext) = self.kernel.as_ref().expect("kernel");
                let n = v.len();
                for i in 0..n {
                    let mut acc = w_ext[i] * phi(v[i], p);
                    for j in 0..n {
                        if j != i {
                            acc += k[i.abs_diff(j)] * phi(v[i] - v[j], p);
                        }
                    }
                    g[i] = 2.0 * p * acc;
                }
            }
        }
        g
    }

    fn ypow(&self, v: &[f64]) -> f64 {
        let q = self.q;
        match self.kind {
            ProblemKind::Dirichlet1d | ProblemKind::Fractional1d => {
                v.iter().map(|x| self.h * x.abs().powf(q)).sum()
            }
            ProblemKind::Dirichlet2d => v.iter().map(|x| self.h * self.h * x.abs().powf(q)).sum(),
            ProblemKind::Steklov1d => {
                v[0].abs().powf(q) + v[self.m].abs().powf(q)
            }
        }
    }

    /// Gradient of `ypow`.
    fn grad_y(&self, v: &[f64]) -> Vec<f64> {
        let q = self.q;
        let mut g = vec![0.0; v.len()];
        match self.kind {
            ProblemKind::Dirichlet1d | ProblemKind::Fractional1d => {
                for (gi, x) in g.iter_mut().zip(v) {
                    *gi = self.h * q * phi(*x, q);
                }
            }
            ProblemKind::Dirichlet2d => {
                for (gi, x) in g.iter_mut().zip(v) {
                    *gi = self.h * self.h * q * phi(*x, q);
                }
            }
            ProblemKind::Steklov1d => {
                g[0] = q * phi(v[0], q);
                g[self.m] = q * phi(v[self.m], q);
            }
        }
        g
    }

    fn ynorm(&self, v: &[f64]) -> f64 {
        self.ypow(v).powf(1.0 / self.q)
    }
}

fn sign_fix(v: &mut [f64]) {
    let mut idx = 0;
    let mut best = 0.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Smallest eigenpair of the p = q = 2 pencil `A v = lambda B v`, assembled
/// densely (tridiagonal bisection for the 1D Dirichlet kind, a boundary
/// Schur complement for Steklov). Returns the eigenvalue and the unit-Y,
/// sign-fixed eigenvector.
pub fn dense_eig_p2(pair: &OperatorPair) -> Result<(f64, Field)> {
    let e = pair.exponents();
    if e.p != 2.0 || e.q != 2.0 {
        return Err(Error::InvalidExponent(format!(
            "dense eigensolve needs p = q = 2, got p = {}, q = {}",
            e.p, e.q
        )));
    }
    let g = pair.grid();
    let m = g.m;
    let h = g.h();
    let (lambda, mut v) = match g.kind {
        ProblemKind::Dirichlet1d => {
            let n = m - 1;
            let d = vec![2.0 / (h * h); n];
            let off = vec![-1.0 / (h * h); n.saturating_sub(1)];
            let lam = symeig::tridiag_eigenvalue(&d, &off, 0);
            let vec = symeig::tridiag_eigenvector(&d, &off, lam);
            (lam, vec)
        }
        ProblemKind::Dirichlet2d => {
            if m > 64 {
                return Err(Error::UnsupportedKind(
                    "dense 2d eigensolve needs m <= 64 (matrix is (m-1)^2 square)",
                ));
            }
            let w = m - 1;
            let n = w * w;
            let mut a = vec![0.0; n * n];
            let hh = h * h;
            for iy in 0..w {
                for ix in 0..w {
                    let i = iy * w + ix;
                    a[i * n + i] = 4.0 / hh;
                    if ix > 0 {
                        a[i * n + (i - 1)] = -1.0 / hh;
                    }
                    if ix + 1 < w {
                        a[i * n + (i + 1)] = -1.0 / hh;
                    }
                    if iy > 0 {
                        a[i * n + (i - w)] = -1.0 / hh;
                    }
                    if iy + 1 < w {
                        a[i * n + (i + w)] = -1.0 / hh;
                    }
                }
            }
            symeig::smallest_sym(n, &mut a)
        }
        ProblemKind::Steklov1d => {
            // Pencil A v = lambda B v with B supported on the two boundary
            // nodes; eliminate the interior block and solve the 2x2 Schur
            // complement S = A_bb - A_bi A_ii^{-1} A_ib.
            let n = m - 1;
            let d: Vec<f64> = vec![2.0 / h + h; n];
            let off: Vec<f64> = vec![-1.0 / h; n.saturating_sub(1)];
            let mut c0 = vec![0.0; n];
            c0[0] = -1.0 / h;
            let mut cm = vec![0.0; n];
            cm[n - 1] = -1.0 / h;
            let z0 = symeig::solve_shifted(&d, &off, 0.0, &c0);
            let zm = symeig::solve_shifted(&d, &off, 0.0, &cm);
            let abb = 1.0 / h + h / 2.0;
            let s00 = abb - (c0[0] * z0[0]);
            let s01 = -(c0[0] * zm[0]);
            let s11 = abb - (cm[n - 1] * zm[n - 1]);
            let disc = ((s00 - s11).powi(2) + 4.0 * s01 * s01).sqrt();
            let lam = 0.5 * (s00 + s11 - disc);
            // eigenvector of the 2x2 block: pick the better-conditioned row
            let cand_a = [s01, lam - s00];
            let cand_b = [lam - s11, s01];
            let vb = if cand_a[0].hypot(cand_a[1]) >= cand_b[0].hypot(cand_b[1]) {
                cand_a
            } else {
                cand_b
            };
            let vb = if vb[0].hypot(vb[1]) == 0.0 { [1.0, 1.0] } else { vb };
            let mut full = vec![0.0; m + 1];
            full[0] = vb[0];
            full[m] = vb[1];
            for i in 0..n {
                full[i + 1] = -(vb[0] * z0[i] + vb[1] * zm[i]);
            }
            (lam, full)
        }
        ProblemKind::Fractional1d => {
            if m > 512 {
                return Err(Error::UnsupportedKind(
                    "dense fractional eigensolve needs m <= 512",
                ));
            }
            let s = e.s.expect("fractional exponent present");
            let radius = pair.truncation_radius().unwrap_or(1.0);
            let (k, w_ext) = gagliardo_kernel(m, 2.0, s, radius);
            let n = m - 1;
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                let mut diag = w_ext[i];
                for j in 0..n {
                    if j != i {
                        diag += k[i.abs_diff(j)];
                        a[i * n + j] = -2.0 * k[i.abs_diff(j)] / h;
                    }
                }
                a[i * n + i] = 2.0 * diag / h;
            }
            symeig::smallest_sym(n, &mut a)
        }
    };
    let ev = Evaluator::for_pair(pair);
    let yn = ev.ynorm(&v);
    if yn == 0.0 || !yn.is_finite() {
        return Err(Error::ZeroField("dense eigenvector has zero Y-norm"));
    }
    for x in v.iter_mut() {
        *x /= yn;
    }
    sign_fix(&mut v);
    Ok((lambda, Field::new(g, v)?))
}

/// Minimizes the Rayleigh quotient `x_norm(w)^p / y_norm(w)^p` over the
/// Y-unit sphere by projected gradient descent with Barzilai-Borwein steps
/// and a monotone Armijo line search. The descent direction is the Rayleigh
/// gradient `grad_x - (p/q) mu grad_y`, which vanishes exactly at eigenpairs.
pub fn rayleigh_minimize_direct(
    pair: &OperatorPair,
    seed: &Field,
    cfg: &OracleConfig,
) -> Result<OracleResult> {
    if seed.grid() != pair.grid() {
        return Err(Error::GridMismatch);
    }
    if !(cfg.tol > 0.0) || cfg.max_iters == 0 {
        return Err(Error::InvalidExponent(format!(
            "oracle config needs tol > 0 and max_iters > 0, got {} / {}",
            cfg.tol, cfg.max_iters
        )));
    }
    let ev = Evaluator::for_pair(pair);
    let (p, q) = (ev.p, ev.q);

    let mut w = seed.values().to_vec();
    let yn = ev.ynorm(&w);
    if yn == 0.0 || !yn.is_finite() {
        return Err(Error::ZeroField("rayleigh minimizer seed"));
    }
    for x in w.iter_mut() {
        *x /= yn;
    }

    let rayleigh = |ev: &Evaluator, v: &[f64]| -> f64 {
        ev.xpow(v) / ev.ypow(v).powf(p / q)
    };

    let direction = |ev: &Evaluator, v: &[f64], mu: f64| -> Vec<f64> {
        let gx = ev.grad_x(v);
        let gy = ev.grad_y(v);
        gx.iter()
            .zip(&gy)
            .map(|(a, b)| a / p - mu * b / q)
            .collect()
    };

    let mut mu = rayleigh(&ev, &w);
    let mut r = direction(&ev, &w, mu);
    let linf = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut opt = linf(&r);
    let mut t = {
        let wmax = linf(&w).max(1e-30);
        let rmax = linf(&r);
        if rmax > 0.0 { 0.1 * wmax / rmax } else { 1.0 }
    };
    let mut iterations = 0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    while opt > cfg.tol * mu.abs().max(1.0) && iterations < cfg.max_iters {
        if let Some((pw, pr)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..w.len() {
                let s = w[i] - pw[i];
                ss += s * s;
                sy += s * (r[i] - pr[i]);
            }
            t = if sy > 0.0 {
                (ss / sy).clamp(1e-12, 1e8)
            } else {
                (t * 4.0).min(1e8)
            };
        }
        let r2 = dot(&r, &r);
        let mut accepted = false;
        let mut step = t;
        for _ in 0..60 {
            let mut cand: Vec<f64> = w.iter().zip(&r).map(|(x, d)| x - step * d).collect();
            let cyn = ev.ynorm(&cand);
            if cyn > 0.0 && cyn.is_finite() {
                for x in cand.iter_mut() {
                    *x /= cyn;
                }
                let cmu = rayleigh(&ev, &cand);
                if cmu.is_finite() && cmu <= mu - 1e-4 * step * r2 {
                    prev = Some((std::mem::take(&mut w), std::mem::take(&mut r)));
                    w = cand;
                    mu = cmu;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break; // flat to rounding; report whatever optimality remains
        }
        r = direction(&ev, &w, mu);
        opt = linf(&r);
    }

    sign_fix(&mut w);
    let yn = ev.ynorm(&w);
    for x in w.iter_mut() {
        *x /= yn;
    }
    mu = rayleigh(&ev, &w);
    let opt = linf(&direction(&ev, &w, mu));
    let converged = opt <= cfg.tol * mu.abs().max(1.0);
    Ok(OracleResult {
        mu_hat: mu,
        w_hat: Field::new(pair.grid(), w)?,
        method: "rayleigh-spg",
        optimality: opt,
        iterations,
        converged,
    })
}

/// Naive reference for the truncated Gagliardo energy: the double sum
/// `sum_{i != j} h^2 |u_i - u_j|^p / |x_i - x_j|^{1+sp}` over the interior
/// nodes together with `K = round(radius * M)` zero-extension nodes on each
/// side of the interval.
pub fn brute_gagliardo(u: &Field, p: f64, s: f64, radius: f64) -> Result<f64> {
    let g = u.grid();
    match g.kind {
        ProblemKind::Dirichlet1d | ProblemKind::Fractional1d => {}
        _ => {
            return Err(Error::UnsupportedKind(
                "brute Gagliardo sum needs an interior-node 1d field",
            ))
        }
    }
    let m = g.m;
    let h = g.h();
    let layers = ((radius * m as f64).round() as isize).max(1);
    let vals = u.values();
    let value_at = |pos: isize| -> f64 {
        if pos >= 1 && pos <= (m as isize) - 1 {
            vals[(pos - 1) as usize]
        } else {
            0.0
        }
    };
    let lo = 1 - layers;
    let hi = (m as isize) - 1 + layers;
    let mut sum = 0.0;
    for i in lo..=hi {
        for j in lo..=hi {
            if i == j {
                continue;
            }
            let diff = value_at(i) - value_at(j);
            if diff == 0.0 {
                continue;
            }
            let dist = (i - j).abs() as f64 * h;
            sum += h * h * diff.abs().powf(p) / dist.powf(1.0 + s * p);
        }
    }
    Ok(sum)
}
