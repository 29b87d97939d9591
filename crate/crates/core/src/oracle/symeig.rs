//! Smallest eigenpair of a dense symmetric matrix, from scratch:
//! Householder tridiagonalization, Sturm-count bisection for the eigenvalue,
//! inverse iteration on the tridiagonal form, and reflector back-transform.
//!
//! This is deliberately self-contained so it can serve as an oracle for the
//! rest of the crate; it shares no code with the operator or solver modules.

/// Householder vector for `x`: returns `(v, beta)` with `v[0] = 1` and
/// `(I - beta v v^T) x = (|x|, 0, ..., 0)` up to sign.
fn house(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len();
    let sigma: f64 = x[1..].iter().map(|v| v * v).sum();
    let mut v = x.to_vec();
    v[0] = 1.0;
    if sigma == 0.0 {
        return (v, 0.0);
    }
    let mu = (x[0] * x[0] + sigma).sqrt();
    let v0 = if x[0] <= 0.0 {
        x[0] - mu
    } else {
        -sigma / (x[0] + mu)
    };
    let beta = 2.0 * v0 * v0 / (sigma + v0 * v0);
    for i in 1..n {
        v[i] = x[i] / v0;
    }
    (v, beta)
}

struct Tridiag {
    d: Vec<f64>,
    e: Vec<f64>, // e[i] couples i and i+1
    reflectors: Vec<(usize, Vec<f64>, f64)>,
}

/// Reduces symmetric `a` (row-major, n x n, destroyed) to tridiagonal form.
fn tridiagonalize(n: usize, a: &mut [f64]) -> Tridiag {
    let mut reflectors = Vec::new();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| a[i * n + k]).collect();
        let (v, beta) = house(&x);
        if beta != 0.0 {
            let m = n - k - 1;
            // p = beta * A22 * v, w = p - (beta/2)(p.v) v, A22 -= v w^T + w v^T
            let mut p = vec![0.0; m];
            for i in 0..m {
                let row = &a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
                p[i] = beta * row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
            }
            let pv: f64 = p.iter().zip(&v).map(|(x, y)| x * y).sum();
            let w: Vec<f64> = p
                .iter()
                .zip(&v)
                .map(|(pi, vi)| pi - 0.5 * beta * pv * vi)
                .collect();
            for i in 0..m {
                for j in 0..m {
                    a[(k + 1 + i) * n + (k + 1 + j)] -= v[i] * w[j] + w[i] * v[j];
                }
            }
            // both branches of house() give (I - beta v v^T) x = |x| e1
            let mu = x.iter().map(|t| t * t).sum::<f64>().sqrt();
            a[(k + 1) * n + k] = mu;
            a[k * n + k + 1] = mu;
            reflectors.push((k, v, beta));
        }
    }
    let d: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let e: Vec<f64> = (0..n.saturating_sub(1))
        .map(|i| a[(i + 1) * n + i])
        .collect();
    Tridiag { d, e, reflectors }
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let n = d.len();
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let denom = if q == 0.0 { 1e-300 } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th smallest eigenvalue (0-based) via bisection on the Sturm count.
pub fn tridiag_eigenvalue(d: &[f64], e: &[f64], k: usize) -> f64 {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = (if i > 0 { e[i - 1].abs() } else { 0.0 })
            + (if i + 1 < n { e[i].abs() } else { 0.0 });
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let mut iter = 0;
    while hi - lo > 1e-15 * scale && iter < 200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        iter += 1;
    }
    0.5 * (lo + hi)
}

/// Solves `(T - lambda I) y = rhs` by tridiagonal elimination with partial
/// pivoting (one extra superdiagonal of fill).
pub(crate) fn solve_shifted(d: &[f64], e: &[f64], lambda: f64, rhs: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut dia: Vec<f64> = d.iter().map(|v| v - lambda).collect();
    let mut up1: Vec<f64> = (0..n).map(|i| if i + 1 < n { e[i] } else { 0.0 }).collect();
    let mut up2 = vec![0.0; n];
    let mut low: Vec<f64> = (0..n)
        .map(|i| if i + 1 < n { e[i] } else { 0.0 })
        .collect();
    let mut b = rhs.to_vec();
    for i in 0..n - 1 {
        if low[i].abs() > dia[i].abs() {
            // swap row i and i+1
            let (a0, a1, a2) = (low[i], dia[i + 1], up1[i + 1]);
            low[i] = dia[i];
            dia[i + 1] = up1[i];
            up1[i + 1] = up2[i];
            dia[i] = a0;
            up1[i] = a1;
            up2[i] = a2;
            b.swap(i, i + 1);
        }
        let piv = if dia[i] == 0.0 { 1e-300 } else { dia[i] };
        let m = low[i] / piv;
        dia[i + 1] -= m * up1[i];
        up1[i + 1] -= m * up2[i];
        b[i + 1] -= m * b[i];
    }
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= up1[i] * y[i + 1];
        }
        if i + 2 < n {
            s -= up2[i] * y[i + 2];
        }
        let piv = if dia[i] == 0.0 { 1e-300 } else { dia[i] };
        y[i] = s / piv;
    }
    y
}

/// Eigenvector of the tridiagonal matrix for the (isolated) eigenvalue
/// `lambda`, by inverse iteration.
pub fn tridiag_eigenvector(d: &[f64], e: &[f64], lambda: f64) -> Vec<f64> {
    let n = d.len();
    // deterministic pseudo-random start
    let mut y: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 2.399_963).sin()).collect();
    for _ in 0..4 {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in y.iter_mut() {
            *v /= norm;
        }
        y = solve_shifted(d, e, lambda, &y);
    }
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in y.iter_mut() {
        *v /= norm;
    }
    y
}

/// Smallest eigenpair of the dense symmetric matrix `a` (row-major,
/// destroyed). The returned vector has Euclidean norm 1.
pub fn smallest_sym(n: usize, a: &mut [f64]) -> (f64, Vec<f64>) {
    if n == 1 {
        return (a[0], vec![1.0]);
    }
    let tri = tridiagonalize(n, a);
    let lambda = tridiag_eigenvalue(&tri.d, &tri.e, 0);
    let mut y = tridiag_eigenvector(&tri.d, &tri.e, lambda);
    // back-transform: y <- H_0 H_1 ... y, applied in reverse order
    for (k, v, beta) in tri.reflectors.iter().rev() {
        let seg = &mut y[k + 1..];
        let vy: f64 = seg.iter().zip(v).map(|(a, b)| a * b).sum();
        for (s, vi) in seg.iter_mut().zip(v) {
            *s -= beta * vy * vi;
        }
    }
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in y.iter_mut() {
        *v /= norm;
    }
    (lambda, y)
}
